use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::rng::{rng_for, SimRng};
use super::SimError;
use crate::landscape::Objective;
use crate::ldp::NoiseModel;

/// One SGD experiment at a fixed step size.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub objective: Arc<dyn Objective>,
    pub noise: Arc<dyn NoiseModel>,
    pub eta: f64,
    pub x0: Vec<f64>,
    pub target_centers: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub max_steps: u64,
    pub record_trajectory: bool,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let d = self.objective.dim();
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(SimError::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_steps < 1 {
            return Err(SimError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.x0.len() != d || self.noise.dim() != d {
            return Err(SimError::InvalidConfig(format!(
                "dimension mismatch: objective {d}, x0 {}, noise {}",
                self.x0.len(),
                self.noise.dim()
            )));
        }
        if self.target_centers.is_empty() || self.target_centers.iter().any(|t| t.len() != d) {
            return Err(SimError::InvalidConfig(
                "target centers must be non-empty points of the objective's dimension".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeSample {
    pub run_id: usize,
    pub eta_index: usize,
    pub eta: f64,
    pub seed: u64,
    pub steps: u64,
    pub censored: bool,
    /// The iterate overflowed; the run is also censored.
    pub diverged: bool,
    pub final_point: Vec<f64>,
}

/// Reusable buffers for [`sgd_step`].
pub struct StepScratch {
    grad: Vec<f64>,
    err: Vec<f64>,
}

impl StepScratch {
    pub fn new(d: usize) -> Self {
        StepScratch {
            grad: vec![0.0; d],
            err: vec![0.0; d],
        }
    }
}

/// `x ← x − η (∇f(x) + err)` with `err` drawn from `noise`.
pub fn sgd_step(
    obj: &dyn Objective,
    noise: &dyn NoiseModel,
    x: &mut [f64],
    eta: f64,
    rng: &mut SimRng,
    scratch: &mut StepScratch,
) -> Result<(), SimError> {
    let value = if noise.value_dependent() { obj.value(x) } else { 0.0 };
    noise.sample(value, rng, &mut scratch.err);
    obj.gradient(x, &mut scratch.grad);
    let mut finite = true;
    for k in 0..x.len() {
        x[k] -= eta * (scratch.grad[k] + scratch.err[k]);
        finite &= x[k].is_finite();
    }
    if finite {
        Ok(())
    } else {
        Err(SimError::NonFinite)
    }
}

/// Step with a caller-supplied gradient error.
pub fn sgd_step_with_error(obj: &dyn Objective, x: &mut [f64], eta: f64, err: &[f64]) -> Result<(), SimError> {
    let g = obj.grad(x);
    for k in 0..x.len() {
        x[k] -= eta * (g[k] + err[k]);
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SimError::NonFinite)
    }
}

fn captured(x: &[f64], targets: &[Vec<f64>], eps2: f64) -> bool {
    targets.iter().any(|t| {
        let mut s = 0.0;
        for (a, b) in x.iter().zip(t) {
            s += (a - b) * (a - b);
        }
        s <= eps2
    })
}

struct Outcome {
    steps: u64,
    censored: bool,
    diverged: bool,
    x: Vec<f64>,
    trace: Vec<Vec<f64>>,
}

fn simulate(cfg: &SgdConfig, seed: u64, stride: Option<u64>) -> Outcome {
    let obj = cfg.objective.as_ref();
    let noise = cfg.noise.as_ref();
    let mut rng = rng_for(seed);
    let mut x = cfg.x0.clone();
    let mut scratch = StepScratch::new(x.len());
    let eps2 = cfg.epsilon * cfg.epsilon;
    let mut trace = Vec::new();
    let mut n = 0u64;
    loop {
        if captured(&x, &cfg.target_centers, eps2) {
            return Outcome { steps: n, censored: false, diverged: false, x, trace };
        }
        if n == cfg.max_steps {
            return Outcome { steps: n, censored: true, diverged: false, x, trace };
        }
        if sgd_step(obj, noise, &mut x, cfg.eta, &mut rng, &mut scratch).is_err() {
            return Outcome { steps: n + 1, censored: true, diverged: true, x, trace };
        }
        n += 1;
        if let Some(s) = stride {
            if n % s == 0 {
                trace.push(x.clone());
            }
        }
    }
}

/// Iterates until an iterate lies within `epsilon` of a target center.
/// `steps = 0` when `x0` is already captured.
pub fn run_to_hit(cfg: &SgdConfig, seed: u64) -> Result<HittingTimeSample, SimError> {
    cfg.validate()?;
    let out = simulate(cfg, seed, None);
    Ok(HittingTimeSample {
        run_id: 0,
        eta_index: 0,
        eta: cfg.eta,
        seed,
        steps: out.steps,
        censored: out.censored,
        diverged: out.diverged,
        final_point: out.x,
    })
}

/// Every `⌊1/η⌋`-th iterate of the same run `run_to_hit` would perform.
pub fn subsampled_trace(cfg: &SgdConfig, seed: u64) -> Result<Vec<Vec<f64>>, SimError> {
    cfg.validate()?;
    if !cfg.record_trajectory {
        return Err(SimError::InvalidConfig("record_trajectory is off".into()));
    }
    let stride = ((1.0 / cfg.eta).floor() as u64).max(1);
    Ok(simulate(cfg, seed, Some(stride)).trace)
}
