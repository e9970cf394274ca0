//! Smooth objectives with analytic derivatives, and the name-keyed registry
//! used to select them from configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LandscapeError;

/// Axis-aligned bounding box `[lo_k, hi_k]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, LandscapeError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(LandscapeError::InvalidObjective(
                "domain box bounds must be non-empty and of equal length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(LandscapeError::InvalidObjective(
                "domain box requires finite lo < hi on every axis".into(),
            ));
        }
        Ok(DomainBox { lo, hi })
    }

    /// Symmetric cube `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        DomainBox {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn diagonal(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Box grown by `fraction` of its extent on each side.
    pub fn expanded(&self, fraction: f64) -> DomainBox {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let pad = fraction * (h - l);
                (l - pad, h + pad)
            })
            .unzip();
        DomainBox { lo, hi }
    }
}

/// A C² objective with gradient and Hessian evaluators.
pub trait Objective: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    fn domain(&self) -> &DomainBox;

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

/// Modified three-hump camel with three minima and two saddles.
#[derive(Debug, Clone)]
pub struct ThreeHumpCamelVariant {
    domain: DomainBox,
}

impl Default for ThreeHumpCamelVariant {
    fn default() -> Self {
        ThreeHumpCamelVariant {
            domain: DomainBox::cube(2, 4.0),
        }
    }
}

impl Objective for ThreeHumpCamelVariant {
    fn name(&self) -> &str {
        "three_hump_camel_variant"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        let a3 = a2 * a;
        2.0 * a3 * a3 / 13.0 + a3 * a2 / 8.0 - 91.0 * a2 * a2 / 64.0 - 24.0 * a3 / 48.0
            + 42.0 * a2 / 16.0
            + 5.0 * b * b / 4.0
            + a * b
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        out[0] = 12.0 * a2 * a2 * a / 13.0 + 5.0 * a2 * a2 / 8.0 - 91.0 * a2 * a / 16.0
            - 72.0 * a2 / 48.0
            + 84.0 * a / 16.0
            + b;
        out[1] = 2.5 * b + a;
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let a = x[0];
        let a2 = a * a;
        let haa = 60.0 * a2 * a2 / 13.0 + 20.0 * a2 * a / 8.0 - 273.0 * a2 / 16.0 - 144.0 * a / 48.0
            + 84.0 / 16.0;
        DMatrix::from_row_slice(2, 2, &[haa, 1.0, 1.0, 2.5])
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

/// `½ Σ (x_k⁴ − 16 x_k² + 5 x_k)`.
#[derive(Debug, Clone)]
pub struct StyblinskiTang {
    dim: usize,
    name: String,
    domain: DomainBox,
}

impl StyblinskiTang {
    pub fn new(dim: usize) -> Self {
        StyblinskiTang {
            dim,
            name: format!("styblinski_tang_{dim}d"),
            domain: DomainBox::cube(dim, 5.0),
        }
    }
}

impl Objective for StyblinskiTang {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .map(|&v| {
                let v2 = v * v;
                v2 * v2 - 16.0 * v2 + 5.0 * v
            })
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = 2.0 * v * v * v - 16.0 * v + 2.5;
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                6.0 * x[i] * x[i] - 16.0
            } else {
                0.0
            }
        })
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

/// `(x² + y − 11)² + (x + y² − 7)²`.
#[derive(Debug, Clone)]
pub struct Himmelblau {
    domain: DomainBox,
}

impl Default for Himmelblau {
    fn default() -> Self {
        Himmelblau {
            domain: DomainBox::cube(2, 6.0),
        }
    }
}

impl Objective for Himmelblau {
    fn name(&self) -> &str {
        "himmelblau"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let a = x[0] * x[0] + x[1] - 11.0;
        let b = x[0] + x[1] * x[1] - 7.0;
        a * a + b * b
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let a = x[0] * x[0] + x[1] - 11.0;
        let b = x[0] + x[1] * x[1] - 7.0;
        out[0] = 4.0 * a * x[0] + 2.0 * b;
        out[1] = 2.0 * a + 4.0 * b * x[1];
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let a = x[0] * x[0] + x[1] - 11.0;
        let b = x[0] + x[1] * x[1] - 7.0;
        let hxx = 4.0 * a + 8.0 * x[0] * x[0] + 2.0;
        let hyy = 2.0 + 4.0 * b + 8.0 * x[1] * x[1];
        let hxy = 4.0 * x[0] + 4.0 * x[1];
        DMatrix::from_row_slice(2, 2, &[hxx, hxy, hxy, hyy])
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

/// `‖x‖² / 2`.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    dim: usize,
    domain: DomainBox,
}

impl QuadraticBowl {
    pub fn new(dim: usize) -> Self {
        QuadraticBowl {
            dim,
            domain: DomainBox::cube(dim, 5.0),
        }
    }
}

impl Objective for QuadraticBowl {
    fn name(&self) -> &str {
        "quadratic_bowl"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

/// One monomial `coeff · Π x_k^{e_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Sparse polynomial over monomials, as declared in configuration files.
#[derive(Debug, Clone)]
pub struct Polynomial {
    name: String,
    dim: usize,
    terms: Vec<Monomial>,
    domain: DomainBox,
}

impl Polynomial {
    pub fn new(
        name: impl Into<String>,
        terms: Vec<Monomial>,
        domain: DomainBox,
    ) -> Result<Self, LandscapeError> {
        let dim = domain.dim();
        if let Some(bad) = terms.iter().find(|t| t.exponents.len() != dim) {
            return Err(LandscapeError::InvalidObjective(format!(
                "monomial {:?} has {} exponents, expected {dim}",
                bad.exponents,
                bad.exponents.len()
            )));
        }
        if terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(LandscapeError::InvalidObjective(
                "polynomial coefficients must be finite".into(),
            ));
        }
        Ok(Polynomial {
            name: name.into(),
            dim,
            terms,
            domain,
        })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }
}

fn powi(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Objective for Polynomial {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exponents
                        .iter()
                        .zip(x)
                        .map(|(&e, &v)| powi(v, e))
                        .product::<f64>()
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            for k in 0..self.dim {
                let ek = t.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut prod = t.coeff * ek as f64 * powi(x[k], ek - 1);
                for (l, (&e, &v)) in t.exponents.iter().zip(x).enumerate() {
                    if l != k {
                        prod *= powi(v, e);
                    }
                }
                out[k] += prod;
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            for i in 0..self.dim {
                for j in i..self.dim {
                    let (ei, ej) = (t.exponents[i], t.exponents[j]);
                    let factor = if i == j {
                        if ei < 2 {
                            continue;
                        }
                        (ei * (ei - 1)) as f64 * powi(x[i], ei - 2)
                    } else {
                        if ei == 0 || ej == 0 {
                            continue;
                        }
                        (ei * ej) as f64 * powi(x[i], ei - 1) * powi(x[j], ej - 1)
                    };
                    let mut prod = t.coeff * factor;
                    for (l, (&e, &v)) in t.exponents.iter().zip(x).enumerate() {
                        if l != i && l != j {
                            prod *= powi(v, e);
                        }
                    }
                    h[(i, j)] += prod;
                    if i != j {
                        h[(j, i)] += prod;
                    }
                }
            }
        }
        h
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

type ObjectiveFactory = Box<dyn Fn() -> Arc<dyn Objective> + Send + Sync>;

/// Objectives selectable by name.
pub struct ObjectiveRegistry {
    entries: BTreeMap<String, ObjectiveFactory>,
}

impl ObjectiveRegistry {
    pub fn empty() -> Self {
        ObjectiveRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("three_hump_camel_variant", || {
            Arc::new(ThreeHumpCamelVariant::default())
        });
        reg.register("styblinski_tang_2d", || Arc::new(StyblinskiTang::new(2)));
        reg.register("himmelblau", || Arc::new(Himmelblau::default()));
        reg.register("quadratic_bowl", || Arc::new(QuadraticBowl::new(2)));
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Arc<dyn Objective> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str) -> Result<Arc<dyn Objective>, LandscapeError> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| LandscapeError::UnknownObjective(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for ObjectiveRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
