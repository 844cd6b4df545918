//! Gradients, optimizers and the `(m, n_a)` scan.

mod report;

pub use report::{ScanRow, ScanTable, TraceEntry, TrainReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comb::{generic_comb, CombSpec, CompiledComb, PerformanceOperator};
use crate::qmath::{derive_seed, RandomSource};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GradientMethod {
    /// `[L(θ + π/2 e_j) − L(θ − π/2 e_j)] / 2`. Exact when every parameter
    /// feeds exactly one Pauli rotation, which holds for all built-in ansätze.
    ParameterShift,
    /// `[L(θ + h e_j) − L(θ − h e_j)] / 2h`.
    CentralDifference { h: f64 },
    /// Reverse-mode sweep through the simulator; one forward and one
    /// backward pass for the whole gradient.
    Adjoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub gradient: GradientMethod,
    pub seed: u64,
    pub target_loss: f64,
    pub log_every: usize,
    /// Independent restarts; training stops at the first one that reaches
    /// `target_loss`.
    pub restarts: usize,
    /// Initial parameters are uniform in `[−init_scale, init_scale]`.
    pub init_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Adam,
            learning_rate: 0.05,
            max_iters: 5000,
            gradient: GradientMethod::Adjoint,
            seed: 0,
            target_loss: 1e-4,
            log_every: 100,
            restarts: 3,
            init_scale: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if let GradientMethod::CentralDifference { h } = self.gradient {
            if !(h > 0.0 && h.is_finite()) {
                return bad("finite-difference step must be positive");
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("Adam needs 0 ≤ β < 1 and ε > 0");
        }
        Ok(())
    }
}

/// A scalar function of the parameters.
pub trait Objective: Sync {
    fn num_params(&self) -> usize;

    fn loss(&self, params: &[f64]) -> Result<f64>;

    /// Loss and exact gradient in one pass, when the objective supports it.
    fn loss_and_gradient(&self, _params: &[f64]) -> Result<(f64, Vec<f64>)> {
        Err(Error::Config("this objective has no adjoint gradient".into()))
    }
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    pub num_params: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn num_params(&self) -> usize {
        self.num_params
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        Ok((self.f)(params))
    }
}

/// `1 − tr[C(θ) Ω]`.
pub struct CombObjective<'a> {
    compiled: CompiledComb,
    omega: &'a PerformanceOperator,
}

impl<'a> CombObjective<'a> {
    pub fn new(comb: &CombSpec, omega: &'a PerformanceOperator) -> Result<Self> {
        if comb.slots() != omega.slots() {
            return Err(Error::LayoutMismatch(format!(
                "comb has {} slot(s) but the performance operator was built for {}",
                comb.slots(),
                omega.slots()
            )));
        }
        Ok(Self { compiled: comb.compile()?, omega })
    }
}

impl Objective for CombObjective<'_> {
    fn num_params(&self) -> usize {
        self.compiled.num_params()
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        Ok(1.0 - self.compiled.score(params, self.omega)?)
    }

    fn loss_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (score, mut grad) = self.compiled.score_gradient(params, self.omega)?;
        grad.iter_mut().for_each(|g| *g = -*g);
        Ok((1.0 - score, grad))
    }
}

fn finite(value: f64, index: Option<usize>) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteLoss { index })
    }
}

/// Gradient of `objective` at `params`.
pub fn gradient(objective: &dyn Objective, params: &[f64], method: GradientMethod) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(objective, params, method)?.1)
}

fn loss_and_gradient(objective: &dyn Objective, params: &[f64], method: GradientMethod) -> Result<(f64, Vec<f64>)> {
    let (step, denom) = match method {
        GradientMethod::Adjoint => {
            let (l, g) = objective.loss_and_gradient(params)?;
            finite(l, None)?;
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteLoss { index: Some(j) });
            }
            return Ok((l, g));
        }
        GradientMethod::ParameterShift => (std::f64::consts::FRAC_PI_2, 2.0),
        GradientMethod::CentralDifference { h } => (h, 2.0 * h),
    };
    let loss = finite(objective.loss(params)?, None)?;
    let grad = (0..params.len())
        .into_par_iter()
        .map(|j| {
            let mut p = params.to_vec();
            p[j] = params[j] + step;
            let plus = finite(objective.loss(&p)?, Some(j))?;
            p[j] = params[j] - step;
            let minus = finite(objective.loss(&p)?, Some(j))?;
            Ok((plus - minus) / denom)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((loss, grad))
}

enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, b1: f64, b2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn new(cfg: &OptimizerConfig, n: usize) -> Self {
        match cfg.method {
            Method::Sgd => Self::Sgd { lr: cfg.learning_rate },
            Method::Adam => Self::Adam {
                lr: cfg.learning_rate,
                b1: cfg.beta1,
                b2: cfg.beta2,
                eps: cfg.epsilon,
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Self::Sgd { lr } => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= *lr * g),
            Self::Adam { lr, b1, b2, eps, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - b1.powi(*t);
                let c2 = 1.0 - b2.powi(*t);
                for i in 0..params.len() {
                    m[i] = *b1 * m[i] + (1.0 - *b1) * grad[i];
                    v[i] = *b2 * v[i] + (1.0 - *b2) * grad[i] * grad[i];
                    params[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                }
            }
        }
    }
}

/// Seed of restart `r`.
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    derive_seed(seed, restart as u64)
}

/// One optimization run from a seeded random initialization.
pub fn optimize(objective: &dyn Objective, cfg: &OptimizerConfig, seed: u64) -> Result<TrainReport> {
    cfg.validate()?;
    let n = objective.num_params();
    let mut rng = RandomSource::new(seed);
    let init: Vec<f64> = (0..n).map(|_| rng.uniform(-cfg.init_scale, cfg.init_scale)).collect();
    optimize_from(objective, cfg, init, seed)
}

/// One optimization run from explicit initial parameters.
pub fn optimize_from(
    objective: &dyn Objective,
    cfg: &OptimizerConfig,
    mut params: Vec<f64>,
    seed: u64,
) -> Result<TrainReport> {
    cfg.validate()?;
    if params.len() != objective.num_params() {
        return Err(Error::DimensionMismatch { expected: objective.num_params(), found: params.len() });
    }
    let mut opt = Optimizer::new(cfg, params.len());
    let mut best = f64::INFINITY;
    let mut best_params = params.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        let (loss, grad) = loss_and_gradient(objective, &params, cfg.gradient)?;
        iterations = it + 1;
        if loss < best {
            best = loss;
            best_params.clone_from(&params);
        }
        let last = it + 1 == cfg.max_iters || best <= cfg.target_loss;
        if it % cfg.log_every == 0 || last {
            trace.push(TraceEntry { iteration: it, loss, best });
            log::debug!("iter {it}: loss {loss:.6e} (best {best:.6e})");
        }
        if last {
            break;
        }
        opt.step(&mut params, &grad);
    }
    Ok(TrainReport {
        loss_trace: trace,
        final_params: best_params,
        final_loss: best,
        iterations,
        seed,
        restart: 0,
        config: cfg.clone(),
        omega: None,
        wall_seconds: 0.0,
    })
}

/// Trains `comb` against `omega` with up to `cfg.restarts` restarts, keeping
/// the best. Stops early once a restart reaches `cfg.target_loss`.
pub fn train(comb: &CombSpec, omega: &PerformanceOperator, cfg: &OptimizerConfig) -> Result<TrainReport> {
    let start = std::time::Instant::now();
    let objective = CombObjective::new(comb, omega)?;
    let mut best: Option<TrainReport> = None;
    for r in 0..cfg.restarts {
        let mut report = optimize(&objective, cfg, restart_seed(cfg.seed, r))?;
        report.restart = r;
        log::info!("restart {r}: best loss {:.6e} after {} iterations", report.final_loss, report.iterations);
        let done = report.final_loss <= cfg.target_loss;
        if best.as_ref().is_none_or(|b| report.final_loss < b.final_loss) {
            best = Some(report);
        }
        if done {
            break;
        }
    }
    let mut report = best.expect("restarts ≥ 1");
    report.omega = Some(report::OmegaFingerprint::of(omega));
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Ansatz and Ω settings of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    /// Entangled layers per tooth.
    pub depth: usize,
    pub samples: usize,
    pub omega_seed: u64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { depth: 12, samples: 1000, omega_seed: 11 }
    }
}

/// Trains [`generic_comb`] at every `(m, n_a)` pair. Row `i` uses
/// `derive_seed(cfg.seed, i)` as its seed stream; rows run in parallel.
pub fn grid_scan(
    m_values: &[usize],
    na_values: &[usize],
    cfg: &OptimizerConfig,
    settings: &ScanSettings,
) -> Result<ScanTable> {
    if m_values.is_empty() || na_values.is_empty() {
        return Err(Error::Config("scan needs at least one m and one n_a".into()));
    }
    cfg.validate()?;
    let omegas = m_values
        .par_iter()
        .map(|&m| PerformanceOperator::sample(m, settings.samples, settings.omega_seed))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize, usize)> = m_values
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| na_values.iter().map(move |&na| (i, m, na)))
        .collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(row, &(i, m, na))| {
            let comb = generic_comb(m, na, settings.depth)?;
            let row_cfg = OptimizerConfig { seed: derive_seed(cfg.seed, row as u64), ..cfg.clone() };
            let report = train(&comb, &omegas[i], &row_cfg)?;
            log::info!("scan m={m} n_a={na}: fidelity {:.6}", 1.0 - report.final_loss);
            Ok(ScanRow {
                m,
                n_a: na,
                fidelity: 1.0 - report.final_loss,
                seed: report.seed,
                iterations: report.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable { rows })
}
