use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::json;

use qcomb::circuit::text;
use qcomb::comb::{comb_choi, generic_comb, sha256_hex};
use qcomb::protocols::{build_civ, build_cv5, build_streamlined_ansatz, verify_inversion, StreamlinedVariant};
use qcomb::qmath::{haar_su2, random_state};
use qcomb::train::{grid_scan, train as run_training, ScanSettings};
use qcomb::{
    ChoiOperator, Circuit, CombSpec, GradientMethod, Method, OptimizerConfig, PerformanceOperator, RandomSource,
    ScanTable, TrainReport,
};

use crate::config::{render, resolve, usage};
use crate::{
    Ansatz, ChoiFlags, CombKind, ExportFlags, GradientKind, MethodKind, OmegaFlags, Protocol, ScanFlags, TrainFlags,
    VerifyFlags,
};

/// Largest slot count dumped densely without `--force`.
const DENSE_SLOT_LIMIT: usize = 5;

fn write_file(path: &str, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {path}"))
}

#[derive(Serialize, Deserialize)]
struct VerifySettings {
    variant: Protocol,
    trials: usize,
    states: usize,
    seed: u64,
    out: String,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { variant: Protocol::Civ, trials: 100, states: 20, seed: 7, out: String::new() }
    }
}

pub fn verify(flags: VerifyFlags) -> anyhow::Result<bool> {
    let s: VerifySettings = resolve(flags.config.as_deref(), &flags)?;
    if s.trials == 0 || s.states == 0 {
        return Err(usage("--trials and --states must be at least 1"));
    }
    let run_config = render("verify", &s)?;
    let comb = match s.variant {
        Protocol::Civ => build_civ(),
        Protocol::Cv5 => build_cv5(),
    };
    let root = RandomSource::new(s.seed);
    let mut records = vec![json!({"record": "config", "run_config": run_config})];
    let (mut worst_fid, mut worst_q1, mut worst_res, mut worst_reset) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for t in 0..s.trials {
        let mut rng = root.derive(t as u64);
        let u = haar_su2(&mut rng);
        let (mut fid, mut q1, mut res, mut reset, mut pass) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, true);
        for _ in 0..s.states {
            let psi = random_state(&mut rng, 1);
            let r = verify_inversion(&comb, &u, &psi)?;
            fid = fid.max(1.0 - r.system_fidelity);
            q1 = q1.max(1.0 - r.q1_zero_probability.unwrap_or(1.0));
            res = res.max(r.factorization_residual);
            if r.reset_checked {
                reset = reset.max(1.0 - r.ancilla_reset_fidelity);
            }
            pass &= r.pass;
        }
        println!(
            "trial {t:4}  infidelity {fid:.5e}  q1 defect {q1:.5e}  residual {res:.5e}  reset defect {reset:.5e}  {}",
            if pass { "pass" } else { "FAIL" }
        );
        records.push(json!({
            "record": "trial",
            "trial": t,
            "max_infidelity": fid,
            "max_q1_defect": q1,
            "max_factorization_residual": res,
            "max_reset_defect": reset,
            "pass": pass,
        }));
        worst_fid = worst_fid.max(fid);
        worst_q1 = worst_q1.max(q1);
        worst_res = worst_res.max(res);
        worst_reset = worst_reset.max(reset);
        failures += usize::from(!pass);
    }
    let ok = failures == 0;
    records.push(json!({
        "record": "summary",
        "variant": s.variant,
        "trials": s.trials,
        "states": s.states,
        "min_fidelity": 1.0 - worst_fid,
        "max_q1_defect": worst_q1,
        "max_factorization_residual": worst_res,
        "max_reset_defect": worst_reset,
        "reset_checked": comb.ancilla_output() == qcomb::AncillaOutput::Reset,
        "failures": failures,
        "pass": ok,
    }));
    println!(
        "summary: {} trials x {} states, min fidelity {:.6}, max q1 defect {worst_q1:.5e}, max residual {worst_res:.5e}, \
         max reset defect {worst_reset:.5e}, {}",
        s.trials,
        s.states,
        1.0 - worst_fid,
        if ok { "all pass".to_string() } else { format!("{failures} failed") }
    );
    if !s.out.is_empty() {
        let mut text = String::new();
        for r in &records {
            text.push_str(&r.to_string());
            text.push('\n');
        }
        write_file(&s.out, text.as_bytes())?;
    }
    Ok(ok)
}

#[derive(Serialize, Deserialize)]
struct OmegaSettings {
    m: usize,
    n: usize,
    seed: u64,
    out: String,
}

impl Default for OmegaSettings {
    fn default() -> Self {
        Self { m: 4, n: 1000, seed: 11, out: "omega.bin".into() }
    }
}

pub fn build_omega(flags: OmegaFlags) -> anyhow::Result<bool> {
    let s: OmegaSettings = resolve(flags.config.as_deref(), &flags)?;
    if s.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if s.m > 8 {
        return Err(usage("--m above 8 is not supported"));
    }
    let run_config = render("build-omega", &s)?;
    let omega = PerformanceOperator::sample(s.m, s.n, s.seed)?;
    let mut bytes = Vec::new();
    omega.write_to(&mut bytes, &run_config)?;
    write_file(&s.out, &bytes)?;
    println!(
        "omega m={} n={} seed={} rank={} sha256={} -> {}",
        s.m,
        s.n,
        s.seed,
        omega.rank(),
        sha256_hex(&bytes),
        s.out
    );
    Ok(true)
}

#[derive(Serialize, Deserialize, Clone)]
struct OptSettings {
    method: MethodKind,
    lr: f64,
    max_iters: usize,
    gradient: GradientKind,
    h: f64,
    seed: u64,
    target_loss: f64,
    log_every: usize,
    restarts: usize,
    init_scale: f64,
}

impl Default for OptSettings {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            method: MethodKind::Adam,
            lr: d.learning_rate,
            max_iters: d.max_iters,
            gradient: GradientKind::Adjoint,
            h: 1e-5,
            seed: d.seed,
            target_loss: d.target_loss,
            log_every: d.log_every,
            restarts: d.restarts,
            init_scale: d.init_scale,
        }
    }
}

impl OptSettings {
    fn to_config(&self) -> anyhow::Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            method: match self.method {
                MethodKind::Adam => Method::Adam,
                MethodKind::Sgd => Method::Sgd,
            },
            learning_rate: self.lr,
            max_iters: self.max_iters,
            gradient: match self.gradient {
                GradientKind::Adjoint => GradientMethod::Adjoint,
                GradientKind::ParameterShift => GradientMethod::ParameterShift,
                GradientKind::CentralDifference => GradientMethod::CentralDifference { h: self.h },
            },
            seed: self.seed,
            target_loss: self.target_loss,
            log_every: self.log_every,
            restarts: self.restarts,
            init_scale: self.init_scale,
            ..OptimizerConfig::default()
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Serialize, Deserialize)]
struct TrainSettings {
    ansatz: Ansatz,
    m: usize,
    na: usize,
    depth: usize,
    layers: usize,
    omega: String,
    n: usize,
    omega_seed: u64,
    #[serde(flatten)]
    opt: OptSettings,
    out: String,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            ansatz: Ansatz::Streamlined4,
            m: 4,
            na: 3,
            depth: ScanSettings::default().depth,
            layers: qcomb::protocols::STREAMLINED_LAYERS,
            omega: String::new(),
            n: 1000,
            omega_seed: 11,
            opt: OptSettings::default(),
            out: "train.jsonl".into(),
        }
    }
}

fn read_omega(path: &str) -> anyhow::Result<PerformanceOperator> {
    let file = File::open(path).with_context(|| format!("cannot open {path}"))?;
    Ok(PerformanceOperator::read_from(BufReader::new(file)).with_context(|| format!("reading {path}"))?.0)
}

pub fn train(flags: TrainFlags) -> anyhow::Result<bool> {
    let s: TrainSettings = resolve(flags.config.as_deref(), &flags)?;
    let cfg = s.opt.to_config()?;
    let run_config = render("train", &s)?;
    let comb = match s.ansatz {
        Ansatz::Streamlined4 => build_streamlined_ansatz(StreamlinedVariant::FourCall, s.layers),
        Ansatz::Streamlined5 => build_streamlined_ansatz(StreamlinedVariant::FiveCall, s.layers),
        Ansatz::Generic => generic_comb(s.m, s.na, s.depth),
    }
    .map_err(|e| usage(e.to_string()))?;
    let omega = if s.omega.is_empty() {
        if s.n == 0 {
            return Err(usage("--n must be at least 1"));
        }
        PerformanceOperator::sample(comb.slots(), s.n, s.omega_seed)?
    } else {
        read_omega(&s.omega)?
    };
    let report = run_training(&comb, &omega, &cfg)?;
    if !s.out.is_empty() {
        let mut bytes = Vec::new();
        report.write_jsonl(&mut bytes, &run_config)?;
        write_file(&s.out, &bytes)?;
    }
    let reached = report.final_loss <= cfg.target_loss;
    println!(
        "final loss {:.5e} (fidelity {:.6}) after {} iterations, restart {}, {} parameters, {:.1} s; target {:.5e} {}",
        report.final_loss,
        1.0 - report.final_loss,
        report.iterations,
        report.restart,
        comb.num_params(),
        report.wall_seconds,
        cfg.target_loss,
        if reached { "reached" } else { "NOT reached" }
    );
    Ok(reached)
}

#[derive(Serialize, Deserialize)]
struct ScanCliSettings {
    m: Vec<usize>,
    na: Vec<usize>,
    depth: usize,
    n: usize,
    omega_seed: u64,
    #[serde(flatten)]
    opt: OptSettings,
    out: String,
}

impl Default for ScanCliSettings {
    fn default() -> Self {
        let d = ScanSettings::default();
        Self {
            m: vec![1, 2, 3, 4],
            na: vec![3],
            depth: d.depth,
            n: d.samples,
            omega_seed: d.omega_seed,
            opt: OptSettings { max_iters: 1500, target_loss: 1e-3, ..OptSettings::default() },
            out: "scan.csv".into(),
        }
    }
}

pub fn scan(flags: ScanFlags) -> anyhow::Result<bool> {
    let s: ScanCliSettings = resolve(flags.config.as_deref(), &flags)?;
    if s.m.is_empty() || s.na.is_empty() {
        return Err(usage("--m and --na need at least one value"));
    }
    if s.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let cfg = s.opt.to_config()?;
    let run_config = render("scan", &s)?;
    let settings = ScanSettings { depth: s.depth, samples: s.n, omega_seed: s.omega_seed };
    let table = grid_scan(&s.m, &s.na, &cfg, &settings)?;
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes, &run_config)?;
    write_file(&s.out, &bytes)?;
    println!("   m  n_a  fidelity  iterations");
    for r in &table.rows {
        println!("{:4} {:4}  {:.6}  {:10}", r.m, r.n_a, r.fidelity, r.iterations);
    }
    Ok(true)
}

#[derive(Serialize, Deserialize, Clone)]
struct CombSettings {
    comb: CombKind,
    m: usize,
    na: usize,
    depth: usize,
    layers: usize,
    teeth: Vec<String>,
    params: String,
}

impl Default for CombSettings {
    fn default() -> Self {
        Self {
            comb: CombKind::Civ,
            m: 4,
            na: 3,
            depth: ScanSettings::default().depth,
            layers: qcomb::protocols::STREAMLINED_LAYERS,
            teeth: Vec::new(),
            params: String::new(),
        }
    }
}

impl CombSettings {
    /// Slot count, without building anything.
    fn slots(&self) -> usize {
        match self.comb {
            CombKind::Civ | CombKind::Streamlined4 => 4,
            CombKind::Cv5 | CombKind::Streamlined5 => 5,
            CombKind::Identity | CombKind::Generic => self.m,
            CombKind::Teeth => self.teeth.len().saturating_sub(1),
        }
    }

    fn build(&self) -> anyhow::Result<(CombSpec, Vec<f64>)> {
        let comb = match self.comb {
            CombKind::Civ => build_civ(),
            CombKind::Cv5 => build_cv5(),
            CombKind::Identity => CombSpec::new(self.na, vec![Circuit::new(self.na + 1); self.m + 1])?,
            CombKind::Generic => generic_comb(self.m, self.na, self.depth).map_err(|e| usage(e.to_string()))?,
            CombKind::Streamlined4 => build_streamlined_ansatz(StreamlinedVariant::FourCall, self.layers)?,
            CombKind::Streamlined5 => build_streamlined_ansatz(StreamlinedVariant::FiveCall, self.layers)?,
            CombKind::Teeth => {
                if self.teeth.is_empty() {
                    return Err(usage("--comb teeth needs --teeth"));
                }
                let teeth = self
                    .teeth
                    .iter()
                    .map(|p| {
                        let src = fs::read_to_string(p).with_context(|| format!("cannot read {p}"))?;
                        text::from_text(&src).with_context(|| format!("parsing {p}"))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                CombSpec::new(self.na, teeth)?
            }
        };
        let params = if self.params.is_empty() {
            vec![0.0; comb.num_params()]
        } else {
            let file = File::open(&self.params).with_context(|| format!("cannot open {}", self.params))?;
            let (report, _) = TrainReport::read_jsonl(BufReader::new(file))?;
            if report.final_params.len() != comb.num_params() {
                bail!(
                    "{} holds {} parameters but the comb has {}",
                    self.params,
                    report.final_params.len(),
                    comb.num_params()
                );
            }
            report.final_params
        };
        Ok((comb, params))
    }
}

#[derive(Serialize, Deserialize, Default)]
struct ChoiSettings {
    #[serde(flatten)]
    comb: CombSettings,
    out: String,
}

pub fn dump_choi(flags: ChoiFlags) -> anyhow::Result<bool> {
    let mut s: ChoiSettings = resolve(flags.config.as_deref(), &flags)?;
    if s.out.is_empty() {
        s.out = "choi.bin".into();
    }
    let m = s.comb.slots();
    if m > DENSE_SLOT_LIMIT && !flags.force {
        return Err(usage(format!(
            "a dense Choi operator with {m} slots has dimension 2^{}; pass --force to write it anyway",
            2 * m + 2
        )));
    }
    let run_config = render("dump-choi", &s)?;
    let (comb, params) = s.comb.build()?;
    let choi = comb_choi(&comb, &params)?;
    let mut out = BufWriter::new(File::create(&s.out).with_context(|| format!("cannot write {}", s.out))?);
    choi.write_to(&mut out, &run_config)?;
    out.flush()?;
    println!(
        "choi {} slots, dim {}, trace {:.6} -> {}",
        comb.slots(),
        choi.matrix.rows(),
        choi.matrix.trace().re,
        s.out
    );
    Ok(true)
}

#[derive(Serialize, Deserialize)]
struct ExportSettings {
    #[serde(flatten)]
    comb: CombSettings,
    out_dir: String,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self { comb: CombSettings::default(), out_dir: "teeth".into() }
    }
}

pub fn export_circuit(flags: ExportFlags) -> anyhow::Result<bool> {
    let s: ExportSettings = resolve(flags.config.as_deref(), &flags)?;
    let (comb, _) = s.comb.build()?;
    fs::create_dir_all(&s.out_dir).with_context(|| format!("cannot create {}", s.out_dir))?;
    for (k, tooth) in comb.teeth().iter().enumerate() {
        let path = Path::new(&s.out_dir).join(format!("tooth{k}.txt"));
        fs::write(&path, text::to_text(tooth)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!("{} teeth -> {}", comb.teeth().len(), s.out_dir);
    Ok(true)
}

pub fn extract_config(path: &Path) -> anyhow::Result<bool> {
    let mut bytes = Vec::new();
    File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .read_to_end(&mut bytes)?;
    let config = if bytes.starts_with(b"QCOMBOMG") {
        PerformanceOperator::read_from(&bytes[..])?.1
    } else if bytes.starts_with(b"QCOMBCHI") {
        ChoiOperator::read_from(&bytes[..])?.1
    } else if bytes.starts_with(b"{") {
        let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        let record: serde_json::Value = serde_json::from_slice(first)?;
        match record.get("run_config").and_then(|c| c.as_str()) {
            Some(c) => c.to_string(),
            None => bail!("{}: first record carries no run_config", path.display()),
        }
    } else if bytes.starts_with(b"#") {
        ScanTable::read_csv(&bytes[..])?.1
    } else {
        bail!("{}: not a qcomb artifact", path.display());
    };
    print!("{config}");
    Ok(true)
}
