use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{LandscapeError, Objective};

const DEDUPE_RADIUS: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
}

impl fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalKind::Minimum => "minimum",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Maximum => "maximum",
            CriticalKind::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub id: usize,
    pub location: Vec<f64>,
    pub value: f64,
    /// Ascending.
    pub hessian_eigs: Vec<f64>,
    /// Unit eigenvectors, aligned with `hessian_eigs`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub kind: CriticalKind,
}

impl CriticalPoint {
    /// Eigenvectors with negative curvature.
    pub fn unstable_directions(&self) -> impl Iterator<Item = &[f64]> {
        self.hessian_eigs
            .iter()
            .zip(&self.eigenvectors)
            .filter(|(l, _)| **l < 0.0)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, Default)]
pub struct CriticalPointSet {
    pub points: Vec<CriticalPoint>,
}

impl CriticalPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&CriticalPoint> {
        self.points.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter()
    }

    pub fn count(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|p| p.kind == kind).count()
    }

    /// Id of the closest point and its distance.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.points
            .iter()
            .map(|p| (p.id, dist(&p.location, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale-aware degeneracy threshold `1e-8 · (1 + max |λ|)`.
pub fn eig_tolerance(eigs: &[f64]) -> f64 {
    1e-8 * (1.0 + eigs.iter().fold(0.0_f64, |m, l| m.max(l.abs())))
}

/// Sign pattern of sorted Hessian eigenvalues against `±eig_tol`.
pub fn classify(hessian_eigs: &[f64], eig_tol: f64) -> CriticalKind {
    if hessian_eigs.iter().any(|l| l.abs() <= eig_tol) {
        CriticalKind::Degenerate
    } else if hessian_eigs.iter().all(|l| *l > eig_tol) {
        CriticalKind::Minimum
    } else if hessian_eigs.iter().all(|l| *l < -eig_tol) {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    }
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(h);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Damped Newton on ∇f = 0 with backtracking on ‖∇f‖.
fn newton(obj: &dyn Objective, seed: &[f64]) -> Option<Vec<f64>> {
    let d = obj.dim();
    let mut x = seed.to_vec();
    let mut g = obj.grad(&x);
    let mut gnorm = norm(&g);
    let mut trial = vec![0.0; d];
    let mut gtrial = vec![0.0; d];
    for _ in 0..NEWTON_MAX_ITER {
        if gnorm < 1e-14 {
            break;
        }
        let h = obj.hessian(&x);
        let step = h.lu().solve(&DVector::from_column_slice(&g))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for k in 0..d {
                trial[k] = x[k] - t * step[k];
            }
            obj.gradient(&trial, &mut gtrial);
            let tn = norm(&gtrial);
            if tn.is_finite() && tn < (1.0 - 1e-4 * t) * gnorm {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        x.copy_from_slice(&trial);
        g.copy_from_slice(&gtrial);
        gnorm = norm(&g);
    }
    (gnorm <= RESIDUAL_TOL).then_some(x)
}

/// Newton search from a uniform `grid_density^d` seed grid over the domain
/// box, deduplicated and classified. Points are ordered lexicographically
/// by location and numbered in that order.
pub fn find_critical_points(
    obj: &dyn Objective,
    grid_density: usize,
) -> Result<CriticalPointSet, LandscapeError> {
    if grid_density < 2 {
        return Err(LandscapeError::GridTooCoarse(grid_density));
    }
    let d = obj.dim();
    let dom = obj.domain();
    let accept_box = dom.expanded(1e-9);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let total = grid_density.pow(d as u32);
    let mut seed = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for k in 0..d {
            let i = rem % grid_density;
            rem /= grid_density;
            seed[k] = dom.lo[k] + (dom.hi[k] - dom.lo[k]) * i as f64 / (grid_density - 1) as f64;
        }
        let Some(x) = newton(obj, &seed) else {
            continue;
        };
        if !accept_box.contains(&x) {
            continue;
        }
        if found.iter().all(|p| dist(p, &x) > DEDUPE_RADIUS) {
            found.push(x);
        }
    }
    if found.is_empty() {
        return Err(LandscapeError::NoConvergence);
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut points = Vec::with_capacity(found.len());
    for (id, location) in found.into_iter().enumerate() {
        let (hessian_eigs, eigenvectors) = sorted_eigen(obj.hessian(&location));
        let kind = classify(&hessian_eigs, eig_tolerance(&hessian_eigs));
        if kind == CriticalKind::Degenerate {
            return Err(LandscapeError::DegenerateCritical {
                location,
                eigenvalues: hessian_eigs,
            });
        }
        points.push(CriticalPoint {
            id,
            value: obj.value(&location),
            location,
            hessian_eigs,
            eigenvectors,
            kind,
        });
    }
    Ok(CriticalPointSet { points })
}

/// CSV body with columns `id, x1..xd, value, kind, eig_min, eig_max`.
pub fn write_critical_points_csv(set: &CriticalPointSet) -> String {
    let d = set.points.first().map_or(0, |p| p.location.len());
    let mut out = String::from("id");
    for k in 1..=d {
        write!(out, ",x{k}").unwrap();
    }
    out.push_str(",value,kind,eig_min,eig_max\n");
    for p in &set.points {
        write!(out, "{}", p.id).unwrap();
        for v in &p.location {
            write!(out, ",{v}").unwrap();
        }
        writeln!(
            out,
            ",{},{},{},{}",
            p.value,
            p.kind,
            p.hessian_eigs.first().copied().unwrap_or(f64::NAN),
            p.hessian_eigs.last().copied().unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    out
}
