//! Training and scan artifacts.
//!
//! A [`TrainReport`] is written as JSON lines: one `config` record, one
//! `trace` record per logged iteration, then one `summary` record. A
//! [`ScanTable`] is CSV with header `m,n_a,fidelity,seed,iterations`,
//! preceded by `#` comment lines holding the run configuration.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::OptimizerConfig;
use crate::comb::{sha256_hex, PerformanceOperator};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: f64,
    /// Lowest loss seen up to and including this iteration.
    pub best: f64,
}

/// Identity of the Ω a report was trained against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaFingerprint {
    pub slots: usize,
    pub samples: usize,
    pub seed: u64,
    pub sha256: String,
}

impl OmegaFingerprint {
    pub fn of(omega: &PerformanceOperator) -> Self {
        Self {
            slots: omega.slots(),
            samples: omega.num_samples(),
            seed: omega.seed(),
            sha256: sha256_hex(&omega.to_bytes()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_trace: Vec<TraceEntry>,
    /// Parameters at the best loss.
    pub final_params: Vec<f64>,
    /// Best loss; equals `loss_trace.last().best`.
    pub final_loss: f64,
    pub iterations: usize,
    /// Seed of the restart that produced this report.
    pub seed: u64,
    pub restart: usize,
    pub config: OptimizerConfig,
    pub omega: Option<OmegaFingerprint>,
    /// Not serialized, so that reruns give identical artifacts.
    pub wall_seconds: f64,
}

impl TrainReport {
    /// Writes the JSON-lines log. `run_config` is embedded verbatim.
    pub fn write_jsonl(&self, mut w: impl Write, run_config: &str) -> Result<()> {
        let header = json!({
            "record": "config",
            "run_config": run_config,
            "optimizer": self.config,
            "omega": self.omega,
        });
        writeln!(w, "{header}")?;
        for e in &self.loss_trace {
            writeln!(w, "{}", json!({"record": "trace", "iteration": e.iteration, "loss": e.loss, "best": e.best}))?;
        }
        let summary = json!({
            "record": "summary",
            "final_loss": self.final_loss,
            "iterations": self.iterations,
            "seed": self.seed,
            "restart": self.restart,
            "final_params": self.final_params,
        });
        writeln!(w, "{summary}")?;
        Ok(())
    }

    /// Parses a log written by [`write_jsonl`](Self::write_jsonl); returns
    /// the report and the embedded run configuration.
    pub fn read_jsonl(r: impl BufRead) -> Result<(Self, String)> {
        #[derive(Deserialize)]
        struct Header {
            run_config: String,
            optimizer: OptimizerConfig,
            omega: Option<OmegaFingerprint>,
        }
        #[derive(Deserialize)]
        struct Summary {
            final_loss: f64,
            iterations: usize,
            seed: u64,
            restart: usize,
            final_params: Vec<f64>,
        }
        let mut header: Option<Header> = None;
        let mut summary: Option<Summary> = None;
        let mut trace = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)?;
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            match value.get("record").and_then(|r| r.as_str()) {
                Some("config") => header = Some(serde_json::from_value(value)?),
                Some("trace") => trace.push(serde_json::from_value(value)?),
                Some("summary") => summary = Some(serde_json::from_value(value)?),
                _ => return Err(bad("unknown record type")),
            }
        }
        let h = header.ok_or_else(|| Error::Format("missing config record".into()))?;
        let s = summary.ok_or_else(|| Error::Format("missing summary record".into()))?;
        if trace.is_empty() {
            return Err(Error::Format("empty loss trace".into()));
        }
        let report = Self {
            loss_trace: trace,
            final_params: s.final_params,
            final_loss: s.final_loss,
            iterations: s.iterations,
            seed: s.seed,
            restart: s.restart,
            config: h.optimizer,
            omega: h.omega,
            wall_seconds: 0.0,
        };
        Ok((report, h.run_config))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub m: usize,
    pub n_a: usize,
    /// `1 − best loss` over restarts.
    pub fidelity: f64,
    pub seed: u64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn row(&self, m: usize, n_a: usize) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.m == m && r.n_a == n_a)
    }

    /// Writes the CSV; every line of `run_config` becomes a `# ` comment.
    pub fn write_csv(&self, mut w: impl Write, run_config: &str) -> Result<()> {
        for line in run_config.lines() {
            writeln!(w, "# {line}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv); returns the
    /// table and the embedded configuration.
    pub fn read_csv(r: impl BufRead) -> Result<(Self, String)> {
        let mut config = String::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            match line.strip_prefix('#') {
                Some(c) => {
                    config.push_str(c.strip_prefix(' ').unwrap_or(c));
                    config.push('\n');
                }
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let rows = reader.deserialize().collect::<std::result::Result<Vec<ScanRow>, _>>()?;
        Ok((Self { rows }, config))
    }
}
