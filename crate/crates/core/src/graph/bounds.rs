use std::collections::BTreeMap;

use super::{GraphError, TransitionGraph};
use crate::landscape::{CriticalPointSet, Objective, SaddleConnection};
use crate::ldp::NoiseModel;

/// Polyline probes keyed by directed edge.
pub type ProbePaths = BTreeMap<(usize, usize), Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBounds {
    pub from: usize,
    pub to: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Heteroclinic orbits as probes: saddle → endpoint along the orbit and
/// endpoint → saddle along the reversed orbit.
pub fn default_probe_paths(cps: &CriticalPointSet, conns: &[SaddleConnection]) -> ProbePaths {
    let mut out = ProbePaths::new();
    for c in conns {
        for (end, orbit) in c.endpoint_ids.iter().zip(&c.orbit_samples) {
            let mut path = orbit.clone();
            path.push(cps.points[*end].location.clone());
            out.entry((c.saddle_id, *end)).or_insert_with(|| path.clone());
            path.reverse();
            out.entry((*end, c.saddle_id)).or_insert(path);
        }
    }
    out
}

/// Largest rise `f(γ_t) − min_{s ≤ t} f(γ_s)` along a polyline.
pub fn upward_jump(obj: &dyn Objective, path: &[Vec<f64>]) -> f64 {
    let mut low = f64::INFINITY;
    let mut jump = 0.0_f64;
    for x in path {
        let v = obj.value(x);
        low = low.min(v);
        jump = jump.max(v - low);
    }
    jump
}

/// Per direct edge: `2·jump / σ_up²` below and `2(f_ij − f_i) / σ_low²`
/// above, where `f_ij` is the higher endpoint value (the connecting saddle).
pub fn interpretable_bounds(
    obj: &dyn Objective,
    g: &TransitionGraph,
    noise: &dyn NoiseModel,
    probes: &ProbePaths,
) -> Result<Vec<EdgeBounds>, GraphError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in &g.nodes {
        lo = lo.min(n.value);
        hi = hi.max(n.value);
    }
    for path in probes.values() {
        for x in path {
            let v = obj.value(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let (var_low, var_up) = noise
        .variance_bounds(lo, hi)
        .ok_or(GraphError::NoVarianceBounds)?;
    let mut out = Vec::new();
    for i in 0..g.len() {
        for j in 0..g.len() {
            if !g.direct[i][j] {
                continue;
            }
            let path = probes
                .get(&(i, j))
                .ok_or(GraphError::NoProbePath { from: i, to: j })?;
            let (fi, fj) = (g.nodes[i].value, g.nodes[j].value);
            out.push(EdgeBounds {
                from: i,
                to: j,
                lower: 2.0 * upward_jump(obj, path) / var_up,
                upper: 2.0 * (fi.max(fj) - fi) / var_low,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::landscape::{find_critical_points, saddle_connections, FlowConfig, ThreeHumpCamelVariant};
    use crate::ldp::{FiniteSupport, IsotropicGaussian, TruncatedGaussian};

    fn camel() -> (ThreeHumpCamelVariant, CriticalPointSet, Vec<SaddleConnection>) {
        let obj = ThreeHumpCamelVariant::default();
        let cps = find_critical_points(&obj, 20).unwrap();
        let conns = saddle_connections(&obj, &cps, &FlowConfig::default()).unwrap();
        (obj, cps, conns)
    }

    #[test]
    fn gaussian_bounds_collapse_onto_the_cost() {
        let (obj, cps, conns) = camel();
        let noise = IsotropicGaussian::new(2500.0, 2).unwrap();
        let g = build_graph(&obj, &cps, &conns, &noise).unwrap();
        let b = interpretable_bounds(&obj, &g, &noise, &default_probe_paths(&cps, &conns)).unwrap();
        assert_eq!(b.len(), 8);
        for e in &b {
            let q = g.q[e.from][e.to].finite().unwrap();
            assert!((e.lower - q).abs() <= 1e-12 && (e.upper - q).abs() <= 1e-15, "{e:?} vs {q}");
        }
        let up = b.iter().find(|e| (e.from, e.to) == (2, 1)).unwrap();
        let want = 2.0 * (cps.points[1].value - cps.points[2].value) / 2500.0;
        assert!((up.lower - want).abs() < 1e-12);
        let down = b.iter().find(|e| (e.from, e.to) == (1, 2)).unwrap();
        assert_eq!(down.lower, 0.0);
    }

    #[test]
    fn truncated_bounds_bracket_the_gaussian_cost() {
        let (obj, cps, conns) = camel();
        // R well above the certification radius for σ = 1
        let noise = TruncatedGaussian::new(1.0, 16.0, 2).unwrap();
        let eps = crate::ldp::error_factor(1.0, 16.0, 2);
        let gauss = IsotropicGaussian::new(1.0, 2).unwrap();
        let g = build_graph(&obj, &cps, &conns, &gauss).unwrap();
        let b = interpretable_bounds(&obj, &g, &noise, &default_probe_paths(&cps, &conns)).unwrap();
        for e in &b {
            let q = g.q[e.from][e.to].finite().unwrap();
            assert!(e.lower <= q + 1e-9 && q <= e.upper + 1e-12);
            if q > 0.0 {
                assert!(e.upper / e.lower <= (1.0 + eps) / (1.0 - eps) * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn missing_probe_or_bounds_are_errors() {
        let (obj, cps, conns) = camel();
        let noise = IsotropicGaussian::new(2500.0, 2).unwrap();
        let g = build_graph(&obj, &cps, &conns, &noise).unwrap();
        assert!(matches!(
            interpretable_bounds(&obj, &g, &noise, &ProbePaths::new()),
            Err(GraphError::NoProbePath { .. })
        ));
        let fs = FiniteSupport::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            interpretable_bounds(&obj, &g, &fs, &default_probe_paths(&cps, &conns)),
            Err(GraphError::NoVarianceBounds)
        ));
    }
}
