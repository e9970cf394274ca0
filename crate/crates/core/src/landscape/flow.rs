use super::critical::{dist, norm};
use super::{CriticalKind, CriticalPointSet, LandscapeError, Objective};

/// Fixed-step RK4 settings for the gradient flow `ẋ = −∇f(x)`.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub step: f64,
    pub capture_radius: f64,
    pub max_time: f64,
    pub grad_tol: f64,
    /// Fraction of the box extent added on each side before a flow counts as diverged.
    pub box_expansion: f64,
    /// Unstable-direction kick as a fraction of the box diagonal.
    pub kick_fraction: f64,
    /// Keep every n-th RK4 state in recorded orbits.
    pub record_stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step: 1e-3,
            capture_radius: 1e-4,
            max_time: 1e4,
            grad_tol: 1e-10,
            box_expansion: 0.5,
            kick_fraction: 1e-5,
            record_stride: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowEnd {
    pub node: usize,
    pub time: f64,
    /// Subsampled polyline from the start to the capture point (empty unless recorded).
    pub orbit: Vec<Vec<f64>>,
}

/// Heteroclinic orbits leaving one critical point along an unstable direction.
#[derive(Debug, Clone)]
pub struct SaddleConnection {
    pub saddle_id: usize,
    pub endpoint_ids: [usize; 2],
    pub orbit_samples: [Vec<Vec<f64>>; 2],
}

fn captured(cps: &CriticalPointSet, x: &[f64], radius: f64, exclude: Option<usize>) -> Option<usize> {
    cps.iter()
        .filter(|p| Some(p.id) != exclude)
        .find(|p| dist(&p.location, x) < radius)
        .map(|p| p.id)
}

/// Integrates the descent flow from `x0` until it comes within the capture
/// radius of a critical point other than `exclude`.
pub fn integrate_descent(
    obj: &dyn Objective,
    x0: &[f64],
    cps: &CriticalPointSet,
    cfg: &FlowConfig,
    exclude: Option<usize>,
    record: bool,
) -> Result<FlowEnd, LandscapeError> {
    let d = obj.dim();
    let bounds = obj.domain().expanded(cfg.box_expansion);
    let h = cfg.step;
    let mut x = x0.to_vec();
    let mut orbit = Vec::new();
    if record {
        orbit.push(x.clone());
    }
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let max_steps = (cfg.max_time / h).ceil() as u64;
    for n in 0..=max_steps {
        if let Some(id) = captured(cps, &x, cfg.capture_radius, exclude) {
            if record {
                orbit.push(x.clone());
            }
            return Ok(FlowEnd {
                node: id,
                time: n as f64 * h,
                orbit,
            });
        }
        if !bounds.contains(&x) || x.iter().any(|v| !v.is_finite()) {
            return Err(LandscapeError::FlowDiverged(x));
        }
        obj.gradient(&x, &mut k1);
        if norm(&k1) < cfg.grad_tol {
            return Err(LandscapeError::FlowStalled(x));
        }
        for k in 0..d {
            tmp[k] = x[k] - 0.5 * h * k1[k];
        }
        obj.gradient(&tmp, &mut k2);
        for k in 0..d {
            tmp[k] = x[k] - 0.5 * h * k2[k];
        }
        obj.gradient(&tmp, &mut k3);
        for k in 0..d {
            tmp[k] = x[k] - h * k3[k];
        }
        obj.gradient(&tmp, &mut k4);
        for k in 0..d {
            x[k] -= h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        if record && (n + 1) % cfg.record_stride as u64 == 0 {
            orbit.push(x.clone());
        }
    }
    Err(LandscapeError::FlowStalled(x))
}

/// Critical point whose basin of attraction contains `x`.
pub fn basin_of(
    obj: &dyn Objective,
    x: &[f64],
    cps: &CriticalPointSet,
    cfg: &FlowConfig,
) -> Result<usize, LandscapeError> {
    if !obj.domain().contains(x) {
        return Err(LandscapeError::OutsideDomain(x.to_vec()));
    }
    integrate_descent(obj, x, cps, cfg, None, false).map(|end| end.node)
}

/// For every saddle and maximum, follows the descent flow from both sides of
/// each unstable eigendirection and records where it lands.
pub fn saddle_connections(
    obj: &dyn Objective,
    cps: &CriticalPointSet,
    cfg: &FlowConfig,
) -> Result<Vec<SaddleConnection>, LandscapeError> {
    let kick = cfg.kick_fraction * obj.domain().diagonal();
    let mut out = Vec::new();
    for p in cps.iter() {
        if !matches!(p.kind, CriticalKind::Saddle | CriticalKind::Maximum) {
            continue;
        }
        for v in p.unstable_directions() {
            let mut ends = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let start: Vec<f64> = p
                    .location
                    .iter()
                    .zip(v)
                    .map(|(x, e)| x + sign * kick * e)
                    .collect();
                let end = match integrate_descent(obj, &start, cps, cfg, Some(p.id), true) {
                    Ok(end) => end,
                    Err(LandscapeError::FlowStalled(_)) => {
                        return Err(LandscapeError::UnresolvedConnection { source_id: p.id })
                    }
                    Err(e) => return Err(e),
                };
                let mut orbit = end.orbit;
                orbit.insert(0, p.location.clone());
                ends.push((end.node, orbit));
            }
            let (b, a) = (ends.pop().unwrap(), ends.pop().unwrap());
            out.push(SaddleConnection {
                saddle_id: p.id,
                endpoint_ids: [a.0, b.0],
                orbit_samples: [a.1, b.1],
            });
        }
    }
    Ok(out)
}
