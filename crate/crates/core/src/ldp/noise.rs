//! Gradient-noise models and their cumulant-generating functions.
//!
//! Every model describes the additive error `err` of the stochastic gradient
//! `∇f(x) + err`. The Hamiltonian at `x` is
//! `H(x, p) = log E exp(−⟨p, ∇f(x) + err⟩) = −⟨p, ∇f(x)⟩ + K(p)` with
//! `K(p) = log E exp(−⟨p, err⟩)`, and the Lagrangian is its convex conjugate.
//! The zero-cost velocity is the descent direction `−∇f(x)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::conjugate::maximize_conjugate;
use super::potential::VarianceProfile;
use super::quadrature::gauss_hermite;
use super::LdpError;
use crate::sim::SimRng;

/// Objective value and gradient at the current state.
#[derive(Debug, Clone, Copy)]
pub struct LocalState<'a> {
    pub value: f64,
    pub grad: &'a [f64],
}

/// `K(p)` with its gradient and Hessian in `p`.
#[derive(Debug, Clone)]
pub struct CgfDerivatives {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

pub trait NoiseModel: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn dim(&self) -> usize;

    /// `K(p) = log E exp(−⟨p, err⟩)` at objective level `value`.
    fn error_cgf(&self, value: f64, p: &[f64]) -> Result<f64, LdpError> {
        self.error_cgf_derivatives(value, p).map(|d| d.value)
    }

    fn error_cgf_derivatives(&self, value: f64, p: &[f64]) -> Result<CgfDerivatives, LdpError>;

    /// Sub-Gaussian variance proxy `σ̄²` at objective level `value`.
    fn variance_proxy(&self, value: f64) -> f64;

    /// `(σ_low², σ_up²)` over objective levels in `[lo, hi]`, when the model
    /// admits them.
    fn variance_bounds(&self, lo: f64, hi: f64) -> Option<(f64, f64)>;

    /// Draws one error vector.
    fn sample(&self, value: f64, rng: &mut SimRng, out: &mut [f64]);

    /// Whether draws depend on the objective value (callers may skip computing it).
    fn value_dependent(&self) -> bool {
        false
    }

    /// Isotropic Gaussian variance at `value`, for models with closed forms.
    fn gaussian_variance(&self, _value: f64) -> Option<f64> {
        None
    }

    fn hamiltonian(&self, at: &LocalState, p: &[f64]) -> Result<f64, LdpError> {
        check_dims(self.dim(), at.grad.len(), p.len())?;
        Ok(-dot(p, at.grad) + self.error_cgf(at.value, p)?)
    }

    fn lagrangian(&self, at: &LocalState, v: &[f64]) -> Result<f64, LdpError> {
        check_dims(self.dim(), at.grad.len(), v.len())?;
        if let Some(var) = self.gaussian_variance(at.value) {
            return Ok(gaussian_lagrangian(var, at.grad, v));
        }
        let w: Vec<f64> = v.iter().zip(at.grad).map(|(a, b)| a + b).collect();
        maximize_conjugate(self, at.value, &w)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(model: usize, grad: usize, other: usize) -> Result<(), LdpError> {
    if model != grad || model != other {
        return Err(LdpError::DimensionMismatch {
            expected: model,
            found: if model != grad { grad } else { other },
        });
    }
    Ok(())
}

fn gaussian_lagrangian(var: f64, grad: &[f64], v: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(grad).map(|(a, b)| (a + b) * (a + b)).sum();
    s / (2.0 * var)
}

fn gaussian_cgf(var: f64, p: &[f64]) -> CgfDerivatives {
    let d = p.len();
    CgfDerivatives {
        value: 0.5 * var * dot(p, p),
        gradient: DVector::from_iterator(d, p.iter().map(|x| var * x)),
        hessian: DMatrix::identity(d, d) * var,
    }
}

fn fill_standard_normal(rng: &mut SimRng, out: &mut [f64], scale: f64) {
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = scale * z;
    }
}

/// `err ~ N(0, σ² I)`.
#[derive(Debug, Clone)]
pub struct IsotropicGaussian {
    variance: f64,
    sdev: f64,
    dim: usize,
}

impl IsotropicGaussian {
    pub fn new(variance: f64, dim: usize) -> Result<Self, LdpError> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(LdpError::InvalidModel(format!(
                "Gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(IsotropicGaussian {
            variance,
            sdev: variance.sqrt(),
            dim,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl NoiseModel for IsotropicGaussian {
    fn kind(&self) -> &'static str {
        "isotropic_gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn error_cgf_derivatives(&self, _value: f64, p: &[f64]) -> Result<CgfDerivatives, LdpError> {
        Ok(gaussian_cgf(self.variance, p))
    }

    fn variance_proxy(&self, _value: f64) -> f64 {
        self.variance
    }

    fn variance_bounds(&self, _lo: f64, _hi: f64) -> Option<(f64, f64)> {
        Some((self.variance, self.variance))
    }

    fn sample(&self, _value: f64, rng: &mut SimRng, out: &mut [f64]) {
        fill_standard_normal(rng, out, self.sdev);
    }

    fn gaussian_variance(&self, _value: f64) -> Option<f64> {
        Some(self.variance)
    }
}

/// `N(0, σ² I)` conditioned on the ball of radius `R`.
///
/// Expectations use a tensor Gauss–Hermite rule (order 64 per axis, d ≤ 3)
/// on the exponentially tilted Gaussian, masked by the ball.
#[derive(Debug, Clone)]
pub struct TruncatedGaussian {
    variance: f64,
    sdev: f64,
    radius: f64,
    dim: usize,
    /// Scaled tensor nodes `√2 σ x_k` and normalized weights.
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    log_mass_at_zero: f64,
}

pub const HERMITE_ORDER: usize = 64;

impl TruncatedGaussian {
    pub fn new(variance: f64, radius: f64, dim: usize) -> Result<Self, LdpError> {
        if !(variance > 0.0) || !(radius > 0.0) {
            return Err(LdpError::InvalidModel(format!(
                "truncated Gaussian needs σ² > 0 and R > 0, got σ²={variance}, R={radius}"
            )));
        }
        if dim == 0 || dim > 3 {
            return Err(LdpError::UnsupportedModel(format!(
                "truncated Gaussian quadrature supports 1 ≤ d ≤ 3, got d={dim}"
            )));
        }
        let sdev = variance.sqrt();
        let (x1, w1) = gauss_hermite(HERMITE_ORDER);
        let norm = std::f64::consts::PI.sqrt().powi(dim as i32);
        let total = HERMITE_ORDER.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut node = Vec::with_capacity(dim);
            let mut w = 1.0 / norm;
            for _ in 0..dim {
                let k = rem % HERMITE_ORDER;
                rem /= HERMITE_ORDER;
                node.push(std::f64::consts::SQRT_2 * sdev * x1[k]);
                w *= w1[k];
            }
            nodes.push(node);
            weights.push(w);
        }
        let mut tg = TruncatedGaussian {
            variance,
            sdev,
            radius,
            dim,
            nodes,
            weights,
            log_mass_at_zero: 0.0,
        };
        tg.log_mass_at_zero = tg.masked_moments(&vec![0.0; dim]).0.ln();
        Ok(tg)
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Ball mass, first and second moments of `N(c, σ² I)` restricted to the ball.
    fn masked_moments(&self, center: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = self.dim;
        let r2 = self.radius * self.radius;
        let mut mass = 0.0;
        let mut m1 = DVector::zeros(d);
        let mut m2 = DMatrix::zeros(d, d);
        let mut y = vec![0.0; d];
        for (node, &w) in self.nodes.iter().zip(&self.weights) {
            let mut n2 = 0.0;
            for k in 0..d {
                y[k] = center[k] + node[k];
                n2 += y[k] * y[k];
            }
            if n2 > r2 {
                continue;
            }
            mass += w;
            for i in 0..d {
                m1[i] += w * y[i];
                for j in 0..d {
                    m2[(i, j)] += w * y[i] * y[j];
                }
            }
        }
        (mass, m1, m2)
    }

    /// `log E exp(⟨p, X̃⟩)` for the centered truncated variable.
    pub fn centered_cgf(&self, p: &[f64]) -> f64 {
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        self.error_cgf(0.0, &neg).unwrap_or(f64::NAN)
    }
}

impl NoiseModel for TruncatedGaussian {
    fn kind(&self) -> &'static str {
        "truncated_gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn error_cgf_derivatives(&self, _value: f64, p: &[f64]) -> Result<CgfDerivatives, LdpError> {
        // tilting N(0, σ²I) by exp(−⟨p, ·⟩) shifts its mean to −σ² p
        let center: Vec<f64> = p.iter().map(|x| -self.variance * x).collect();
        let (mass, m1, m2) = self.masked_moments(&center);
        if !(mass > 0.0) {
            return Err(LdpError::Overflow);
        }
        let mean = m1 / mass;
        let cov = m2 / mass - &mean * mean.transpose();
        Ok(CgfDerivatives {
            value: 0.5 * self.variance * dot(p, p) + mass.ln() - self.log_mass_at_zero,
            gradient: -mean,
            hessian: cov,
        })
    }

    fn variance_proxy(&self, _value: f64) -> f64 {
        self.variance
    }

    fn variance_bounds(&self, _lo: f64, _hi: f64) -> Option<(f64, f64)> {
        let eps = super::truncated::error_factor(self.variance, self.radius, self.dim);
        (eps < 1.0).then(|| ((1.0 - eps) * self.variance, (1.0 + eps) * self.variance))
    }

    fn sample(&self, _value: f64, rng: &mut SimRng, out: &mut [f64]) {
        let r2 = self.radius * self.radius;
        loop {
            fill_standard_normal(rng, out, self.sdev);
            if dot(out, out) <= r2 {
                return;
            }
        }
    }
}

/// Finitely many error vectors with probabilities (finite-sum / ERM noise).
#[derive(Debug, Clone)]
pub struct FiniteSupport {
    atoms: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    dim: usize,
}

impl FiniteSupport {
    pub fn new(atoms: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self, LdpError> {
        if atoms.is_empty() || atoms.len() != probabilities.len() {
            return Err(LdpError::InvalidModel(
                "finite support needs one probability per atom".into(),
            ));
        }
        let dim = atoms[0].len();
        if dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(LdpError::InvalidModel(
                "finite-support atoms must share a positive dimension".into(),
            ));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(LdpError::InvalidModel("probabilities must be non-negative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LdpError::InvalidModel(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        for k in 0..dim {
            let mean: f64 = atoms.iter().zip(&probabilities).map(|(a, p)| p * a[k]).sum();
            if mean.abs() > 1e-10 {
                return Err(LdpError::InvalidModel(format!(
                    "finite-support error has mean {mean} on axis {k}, expected 0"
                )));
            }
        }
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(FiniteSupport {
            atoms,
            probabilities,
            cumulative,
            dim,
        })
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

impl NoiseModel for FiniteSupport {
    fn kind(&self) -> &'static str {
        "finite_support"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn error_cgf_derivatives(&self, _value: f64, p: &[f64]) -> Result<CgfDerivatives, LdpError> {
        // log-sum-exp with the largest exponent factored out
        let exps: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.probabilities)
            .map(|(a, &w)| if w > 0.0 { w.ln() - dot(p, a) } else { f64::NEG_INFINITY })
            .collect();
        let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(LdpError::Overflow);
        }
        let d = self.dim;
        let mut z = 0.0;
        let mut m1 = DVector::zeros(d);
        let mut m2 = DMatrix::zeros(d, d);
        for (a, e) in self.atoms.iter().zip(&exps) {
            let t = (e - shift).exp();
            z += t;
            for i in 0..d {
                m1[i] += t * a[i];
                for j in 0..d {
                    m2[(i, j)] += t * a[i] * a[j];
                }
            }
        }
        let mean = m1 / z;
        let cov = m2 / z - &mean * mean.transpose();
        Ok(CgfDerivatives {
            value: shift + z.ln(),
            gradient: -mean,
            hessian: cov,
        })
    }

    fn variance_proxy(&self, _value: f64) -> f64 {
        // Hoeffding: ⟨p, err⟩ ∈ [−‖p‖M, ‖p‖M] gives proxy M²
        self.atoms
            .iter()
            .zip(&self.probabilities)
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, _)| dot(a, a))
            .fold(0.0, f64::max)
    }

    fn variance_bounds(&self, _lo: f64, _hi: f64) -> Option<(f64, f64)> {
        None
    }

    fn sample(&self, _value: f64, rng: &mut SimRng, out: &mut [f64]) {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|c| *c <= u)
            .min(self.atoms.len() - 1);
        out.copy_from_slice(&self.atoms[idx]);
    }
}

/// `err ~ N(0, σ²(f(x)) I)` with variance depending on the objective value.
#[derive(Debug, Clone)]
pub struct StateDependentGaussian {
    profile: VarianceProfile,
    dim: usize,
}

impl StateDependentGaussian {
    pub fn new(profile: VarianceProfile, dim: usize) -> Self {
        StateDependentGaussian { profile, dim }
    }

    pub fn profile(&self) -> &VarianceProfile {
        &self.profile
    }

    fn var_at(&self, value: f64) -> f64 {
        self.profile.variance(value)
    }
}

impl NoiseModel for StateDependentGaussian {
    fn kind(&self) -> &'static str {
        "state_dependent_gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn error_cgf_derivatives(&self, value: f64, p: &[f64]) -> Result<CgfDerivatives, LdpError> {
        let var = self.var_at(value);
        if !(var > 0.0) {
            return Err(LdpError::NonPositiveVariance { level: value, variance: var });
        }
        Ok(gaussian_cgf(var, p))
    }

    fn variance_proxy(&self, value: f64) -> f64 {
        self.var_at(value)
    }

    fn variance_bounds(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let n = 256;
        let (mut vmin, mut vmax) = (f64::INFINITY, 0.0_f64);
        for k in 0..=n {
            let z = lo + (hi - lo) * k as f64 / n as f64;
            let v = self.var_at(z);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        (vmin > 0.0).then_some((vmin, vmax))
    }

    fn sample(&self, value: f64, rng: &mut SimRng, out: &mut [f64]) {
        fill_standard_normal(rng, out, self.var_at(value).max(0.0).sqrt());
    }

    fn value_dependent(&self) -> bool {
        true
    }

    fn gaussian_variance(&self, value: f64) -> Option<f64> {
        Some(self.var_at(value))
    }
}

/// Noise block as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<VarianceProfile>,
}

impl NoiseParams {
    pub fn gaussian(variance: f64) -> Self {
        NoiseParams {
            kind: "isotropic_gaussian".into(),
            variance: Some(variance),
            ..Default::default()
        }
    }

    /// `variance`, or `sigma²` when only the standard deviation is given.
    pub fn resolved_variance(&self) -> Result<f64, LdpError> {
        match (self.variance, self.sigma) {
            (Some(v), None) => Ok(v),
            (None, Some(s)) => Ok(s * s),
            (Some(_), Some(_)) => Err(LdpError::InvalidModel(
                "give either 'variance' or 'sigma', not both".into(),
            )),
            (None, None) => Err(LdpError::InvalidModel(format!(
                "noise kind '{}' needs 'variance' or 'sigma'",
                self.kind
            ))),
        }
    }
}

/// Parses a finite-support atom table: one row per atom, vector components
/// followed by a probability column.
pub fn parse_atoms_csv(text: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>), LdpError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut atoms = Vec::new();
    let mut probs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| LdpError::InvalidModel(format!("atoms CSV: {e}")))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| LdpError::InvalidModel(format!("atoms CSV: {e}")))?;
        if vals.len() < 2 {
            return Err(LdpError::InvalidModel(
                "atoms CSV rows need at least one component and a probability".into(),
            ));
        }
        let (p, a) = vals.split_last().unwrap();
        atoms.push(a.to_vec());
        probs.push(*p);
    }
    Ok((atoms, probs))
}

type NoiseFactory =
    Box<dyn Fn(&NoiseParams, usize) -> Result<Arc<dyn NoiseModel>, LdpError> + Send + Sync>;

/// Noise models selectable by their `kind` tag.
pub struct NoiseRegistry {
    entries: BTreeMap<String, NoiseFactory>,
}

impl NoiseRegistry {
    pub fn empty() -> Self {
        NoiseRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("isotropic_gaussian", |p, dim| {
            Ok(Arc::new(IsotropicGaussian::new(p.resolved_variance()?, dim)?))
        });
        reg.register("truncated_gaussian", |p, dim| {
            let radius = p.radius.ok_or_else(|| {
                LdpError::InvalidModel("truncated_gaussian needs 'radius'".into())
            })?;
            Ok(Arc::new(TruncatedGaussian::new(p.resolved_variance()?, radius, dim)?))
        });
        reg.register("finite_support", |p, dim| {
            let (atoms, probs) = match (&p.atoms, &p.probabilities, &p.atoms_csv) {
                (Some(a), Some(w), None) => (a.clone(), w.clone()),
                (None, None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        LdpError::InvalidModel(format!("cannot read atoms CSV '{path}': {e}"))
                    })?;
                    parse_atoms_csv(&text)?
                }
                _ => {
                    return Err(LdpError::InvalidModel(
                        "finite_support needs 'atoms' + 'probabilities' or 'atoms_csv'".into(),
                    ))
                }
            };
            let model = FiniteSupport::new(atoms, probs)?;
            if model.dim() != dim {
                return Err(LdpError::DimensionMismatch {
                    expected: dim,
                    found: model.dim(),
                });
            }
            Ok(Arc::new(model))
        });
        reg.register("state_dependent_gaussian", |p, dim| {
            let profile = p.profile.clone().ok_or_else(|| {
                LdpError::InvalidModel("state_dependent_gaussian needs 'profile'".into())
            })?;
            Ok(Arc::new(StateDependentGaussian::new(profile, dim)))
        });
        reg
    }

    pub fn register<F>(&mut self, kind: &str, factory: F)
    where
        F: Fn(&NoiseParams, usize) -> Result<Arc<dyn NoiseModel>, LdpError> + Send + Sync + 'static,
    {
        self.entries.insert(kind.to_string(), Box::new(factory));
    }

    pub fn create(&self, params: &NoiseParams, dim: usize) -> Result<Arc<dyn NoiseModel>, LdpError> {
        let factory = self
            .entries
            .get(&params.kind)
            .ok_or_else(|| LdpError::UnsupportedModel(format!("unknown noise kind '{}'", params.kind)))?;
        factory(params, dim)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for NoiseRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
