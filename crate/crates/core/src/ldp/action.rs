use serde::{Deserialize, Serialize};

use super::noise::{LocalState, NoiseModel};
use super::LdpError;
use crate::landscape::Objective;

/// Piecewise-linear curve with time stamps at its nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

impl DiscretePath {
    pub fn new(points: Vec<Vec<f64>>, times: Vec<f64>) -> Result<Self, LdpError> {
        let path = DiscretePath { points, times };
        path.validate()?;
        Ok(path)
    }

    /// Uniformly timed straight segment with `n_nodes` nodes over `[0, horizon]`.
    pub fn straight(from: &[f64], to: &[f64], n_nodes: usize, horizon: f64) -> Result<Self, LdpError> {
        let n = n_nodes.max(2);
        let points = (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        let times = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
        Self::new(points, times)
    }

    pub fn validate(&self) -> Result<(), LdpError> {
        if self.points.len() < 2 {
            return Err(LdpError::InvalidPath("a path needs at least two points".into()));
        }
        if self.points.len() != self.times.len() {
            return Err(LdpError::InvalidPath(format!(
                "{} points but {} time stamps",
                self.points.len(),
                self.times.len()
            )));
        }
        let d = self.points[0].len();
        if let Some(p) = self.points.iter().find(|p| p.len() != d) {
            return Err(LdpError::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LdpError::InvalidPath("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Concatenates `other`, which must start where `self` ends.
    pub fn join(&self, other: &DiscretePath) -> Result<DiscretePath, LdpError> {
        let end = self.points.last().unwrap();
        if end != &other.points[0] {
            return Err(LdpError::InvalidPath("paths do not meet".into()));
        }
        let offset = self.times.last().unwrap() - other.times[0];
        let mut points = self.points.clone();
        let mut times = self.times.clone();
        points.extend(other.points[1..].iter().cloned());
        times.extend(other.times[1..].iter().map(|t| t + offset));
        DiscretePath::new(points, times)
    }
}

/// Action of one linear segment `a → b` traversed in time `dt`, by the
/// trapezoidal rule on `subsamples` equal pieces.
pub(crate) fn segment_action(
    obj: &dyn Objective,
    noise: &dyn NoiseModel,
    a: &[f64],
    b: &[f64],
    dt: f64,
    subsamples: usize,
    scratch: &mut SegmentScratch,
) -> Result<f64, LdpError> {
    let d = a.len();
    for k in 0..d {
        scratch.vel[k] = (b[k] - a[k]) / dt;
    }
    let m = subsamples.max(1);
    let mut sum = 0.0;
    for i in 0..=m {
        let s = i as f64 / m as f64;
        for k in 0..d {
            scratch.x[k] = a[k] + s * (b[k] - a[k]);
        }
        obj.gradient(&scratch.x, &mut scratch.grad);
        let at = LocalState {
            value: obj.value(&scratch.x),
            grad: &scratch.grad,
        };
        let l = noise.lagrangian(&at, &scratch.vel)?;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        sum += w * l;
    }
    Ok(sum * dt / m as f64)
}

pub(crate) struct SegmentScratch {
    x: Vec<f64>,
    grad: Vec<f64>,
    vel: Vec<f64>,
}

impl SegmentScratch {
    pub(crate) fn new(d: usize) -> Self {
        SegmentScratch {
            x: vec![0.0; d],
            grad: vec![0.0; d],
            vel: vec![0.0; d],
        }
    }
}

/// `∫ L(γ_t, γ̇_t) dt` along the piecewise-linear path.
pub fn action(
    obj: &dyn Objective,
    noise: &dyn NoiseModel,
    path: &DiscretePath,
    subsamples_per_segment: usize,
) -> Result<f64, LdpError> {
    path.validate()?;
    if subsamples_per_segment == 0 {
        return Err(LdpError::InvalidPath("subsamples_per_segment must be at least 1".into()));
    }
    let d = obj.dim();
    if path.points[0].len() != d {
        return Err(LdpError::DimensionMismatch {
            expected: d,
            found: path.points[0].len(),
        });
    }
    let mut scratch = SegmentScratch::new(d);
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        total += segment_action(
            obj,
            noise,
            &path.points[k],
            &path.points[k + 1],
            path.times[k + 1] - path.times[k],
            subsamples_per_segment,
            &mut scratch,
        )?;
    }
    Ok(total)
}
