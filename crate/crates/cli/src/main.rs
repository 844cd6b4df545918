use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "qcomb", version, about = "Quantum-comb training and unitary-inversion verification")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the inversion protocols on Haar-random unitaries and states.
    Verify(VerifyFlags),
    /// Sample a performance operator and write it to disk.
    BuildOmega(OmegaFlags),
    /// Train a comb against a performance operator.
    Train(TrainFlags),
    /// Train the generic ansatz over a grid of (m, n_a).
    Scan(ScanFlags),
    /// Write the dense Choi operator of a comb.
    DumpChoi(ChoiFlags),
    /// Write the teeth of a comb in the circuit text format.
    ExportCircuit(ExportFlags),
    /// Print the run configuration embedded in an artifact.
    ExtractConfig {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Civ,
    Cv5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ansatz {
    Streamlined4,
    Streamlined5,
    Generic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombKind {
    Civ,
    Cv5,
    Identity,
    Generic,
    Streamlined4,
    Streamlined5,
    /// Teeth read from circuit text files (`--teeth`).
    Teeth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GradientKind {
    Adjoint,
    ParameterShift,
    CentralDifference,
}

macro_rules! flags {
    ($(#[$meta:meta])* struct $name:ident { $($(#[$fmeta:meta])* $field:ident: $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Args, Serialize, Default)]
        pub struct $name {
            /// Flat TOML file with default values for any of the flags.
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

flags! {
    struct VerifyFlags {
        variant: Protocol,
        /// Number of Haar-random unitaries.
        trials: usize,
        /// Random input states per unitary.
        states: usize,
        seed: u64,
        /// JSON-lines record file.
        out: String,
    }
}

flags! {
    struct OmegaFlags {
        /// Number of slots.
        m: usize,
        /// Number of Haar samples.
        n: usize,
        seed: u64,
        out: String,
    }
}

#[derive(Args, Serialize, Default)]
pub struct OptFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodKind>,
    /// Learning rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientKind>,
    /// Finite-difference step.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

#[derive(Args, Serialize, Default)]
pub struct TrainFlags {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<Ansatz>,
    /// Slots of the generic ansatz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Ancillas of the generic ansatz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na: Option<usize>,
    /// Entangled layers per tooth (generic ansatz).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Universal3 layers per block (streamlined ansätze).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    /// Performance-operator file; built from `--n`/`--omega-seed` if empty.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptFlags,
    /// JSON-lines training log.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Args, Serialize, Default)]
pub struct ScanFlags {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Comma-separated slot counts.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    /// Comma-separated ancilla counts.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptFlags,
    /// CSV output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Args, Serialize, Default)]
pub struct CombFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comb: Option<CombKind>,
    /// Slots (identity and generic combs).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Ancillas (identity, generic and teeth combs).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    /// Comma-separated tooth files for `--comb teeth`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teeth: Option<Vec<String>>,
    /// Training log whose final parameters are used (zeros if empty).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
}

#[derive(Args, Serialize, Default)]
pub struct ChoiFlags {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub comb: CombFlags,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Allow dense dumps with more than 5 slots.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Args, Serialize, Default)]
pub struct ExportFlags {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub comb: CombFlags,
    /// Directory receiving `tooth0.txt … toothM.txt`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Verify(f) => commands::verify(f),
        Command::BuildOmega(f) => commands::build_omega(f),
        Command::Train(f) => commands::train(f),
        Command::Scan(f) => commands::scan(f),
        Command::DumpChoi(f) => commands::dump_choi(f),
        Command::ExportCircuit(f) => commands::export_circuit(f),
        Command::ExtractConfig { path } => commands::extract_config(&path),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<config::Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
