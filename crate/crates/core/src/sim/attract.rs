use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::rng::SimRng;
use crate::landscape::Objective;

/// Directions sampled per radius.
pub const SHELL_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusStrength {
    pub radius: f64,
    /// `min ⟨∇f(x), x − x*⟩ / ‖x − x*‖²` over the sampled shell.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractingStrength {
    pub per_radius: Vec<RadiusStrength>,
    /// Largest `μ(R)·R²` among radii with `μ(R) > 0`, with its radius.
    pub best_mu_r2: Option<(f64, f64)>,
    /// Radii where `μ(R) ≤ 0`.
    pub violations: Vec<f64>,
}

fn directions(d: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    if d == 2 {
        return (0..SHELL_SAMPLES)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / SHELL_SAMPLES as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = SimRng::seed_from_u64(0x5eed);
    (0..SHELL_SAMPLES * d)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Samples the sharpness ratio on spheres of each radius around `center`.
pub fn check_attracting_strength(obj: &dyn Objective, center: &[f64], radii: &[f64]) -> AttractingStrength {
    let dirs = directions(center.len());
    let mut grad = vec![0.0; center.len()];
    let mut x = vec![0.0; center.len()];
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut best: Option<(f64, f64)> = None;
    let mut violations = Vec::new();
    for &r in radii {
        let mut mu = f64::INFINITY;
        for u in &dirs {
            for k in 0..x.len() {
                x[k] = center[k] + r * u[k];
            }
            obj.gradient(&x, &mut grad);
            let s: f64 = grad.iter().zip(u).map(|(g, u)| g * u).sum::<f64>() / r;
            mu = mu.min(s);
        }
        if mu > 0.0 {
            let v = mu * r * r;
            if best.map_or(true, |b| v > b.0) {
                best = Some((v, r));
            }
        } else {
            violations.push(r);
        }
        per_radius.push(RadiusStrength { radius: r, mu });
    }
    AttractingStrength {
        per_radius,
        best_mu_r2: best,
        violations,
    }
}

/// `n` radii evenly spaced on `(0, r_max]`.
pub fn radius_grid(r_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| r_max * k as f64 / n as f64).collect()
}
