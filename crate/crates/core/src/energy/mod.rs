//! Transition forests, prunings and the energies built from them.

mod bottleneck;
mod forest;

pub use bottleneck::{bottleneck_bound, lower_costs, BottleneckBound, NeighborGraph};
pub use forest::{
    count_forests, energy, pruned_energy, relative_energy, score, Pruning, TransitionForest,
    MAX_NON_TARGETS,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::TransitionGraph;
use crate::landscape::{basin_of, CriticalKind, CriticalPointSet, FlowConfig, LandscapeError, Objective};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("{0} non-target nodes exceed the enumeration limit")]
    TooLarge(usize),
    #[error("no transition forest exists")]
    Infeasible,
    #[error("node {0} is not a valid start (missing or a target)")]
    InvalidStart(usize),
    #[error("minimum {0} has no neighbor path to the targets")]
    DisconnectedNeighborGraph(usize),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

/// All energies of a closed graph with their witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub targets: Vec<usize>,
    pub energy_t: f64,
    pub witness_forest: TransitionForest,
    /// `E(j ↛ T)` per non-target node.
    pub pruned: BTreeMap<usize, f64>,
    /// `E(T‖j)` per non-target node.
    pub relative: BTreeMap<usize, f64>,
    pub witness_prunings: BTreeMap<usize, Pruning>,
}

impl EnergyReport {
    pub fn compute(g: &TransitionGraph) -> Result<Self, EnergyError> {
        let (energy_t, witness_forest) = energy(g)?;
        let mut pruned = BTreeMap::new();
        let mut relative = BTreeMap::new();
        let mut witness_prunings = BTreeMap::new();
        for j in g.non_targets() {
            let (p, w) = pruned_energy(g, j)?;
            pruned.insert(j, p);
            relative.insert(j, (energy_t - p).max(0.0));
            witness_prunings.insert(j, w);
        }
        Ok(EnergyReport {
            targets: g.targets.clone(),
            energy_t,
            witness_forest,
            pruned,
            relative,
            witness_prunings,
        })
    }

    /// `E(T‖j)`, zero for targets.
    pub fn relative_of(&self, j: usize) -> f64 {
        self.relative.get(&j).copied().unwrap_or(0.0)
    }

    pub fn max_relative(&self) -> f64 {
        self.relative.values().copied().fold(0.0, f64::max)
    }

    /// `node,pruned_energy,relative_energy` per non-target node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,pruned_energy,relative_energy\n");
        for (j, p) in &self.pruned {
            let _ = writeln!(out, "{j},{p},{}", self.relative[j]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let edges = |m: &BTreeMap<usize, usize>| {
            m.iter()
                .map(|(i, j)| format!("{i}->{j}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "targets: {:?}", self.targets);
        let _ = writeln!(out, "E(T) = {}", self.energy_t);
        let _ = writeln!(out, "forest: {}", edges(&self.witness_forest.out_edge));
        for (j, p) in &self.pruned {
            let w = &self.witness_prunings[j];
            let _ = writeln!(
                out,
                "node {j}: pruned {p}  relative {}  pruning [{}] open {}",
                self.relative[j],
                edges(&w.out_edge),
                w.open_node
            );
        }
        out
    }
}

/// `max_j (E(T‖j) − q(a, j))₊` for a start whose gradient flow ends at
/// node `a`, with `q(a, ·)` read from the closed graph and `q(a, a) = 0`.
pub fn energy_from_attractor(g: &TransitionGraph, report: &EnergyReport, a: usize) -> f64 {
    if g.is_target(a) {
        return 0.0;
    }
    let mut e = 0.0_f64;
    for (&j, &rel) in &report.relative {
        let q = if j == a { Some(0.0) } else { g.q[a][j].finite() };
        if let Some(q) = q {
            e = e.max(rel - q);
        }
    }
    e
}

/// `E(T‖x)` via the attractor of `x` under the gradient flow.
pub fn energy_from_point(
    g: &TransitionGraph,
    report: &EnergyReport,
    obj: &dyn Objective,
    cps: &CriticalPointSet,
    x: &[f64],
    flow: &FlowConfig,
) -> Result<f64, EnergyError> {
    let a = basin_of(obj, x, cps, flow)?;
    Ok(energy_from_attractor(g, report, a))
}

/// Non-target local minima; their presence is equivalent to a positive
/// relative energy somewhere.
pub fn has_spurious_minima(g: &TransitionGraph) -> (bool, Vec<usize>) {
    let w: Vec<usize> = g
        .non_targets()
        .into_iter()
        .filter(|&i| g.nodes[i].kind == CriticalKind::Minimum)
        .collect();
    (!w.is_empty(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, chain_closure};
    use crate::landscape::{find_critical_points, saddle_connections, Himmelblau, QuadraticBowl, ThreeHumpCamelVariant};
    use crate::ldp::IsotropicGaussian;

    fn closed(obj: &dyn Objective) -> (CriticalPointSet, TransitionGraph) {
        let cps = find_critical_points(obj, 20).unwrap();
        let conns = saddle_connections(obj, &cps, &FlowConfig::default()).unwrap();
        let noise = IsotropicGaussian::new(2500.0, 2).unwrap();
        let g = chain_closure(&build_graph(obj, &cps, &conns, &noise).unwrap()).unwrap();
        (cps, g)
    }

    #[test]
    fn camel_relative_energy_matches_closed_form() {
        let obj = ThreeHumpCamelVariant::default();
        let (cps, g) = closed(&obj);
        let q = |i: usize, j: usize| g.q[i][j].finite().unwrap();
        let rel = relative_energy(&g, 2).unwrap();
        let want = q(2, 1) + q(4, 3) - q(2, 3).min(q(4, 3));
        assert_eq!(rel, want);
        let f: Vec<f64> = cps.iter().map(|p| p.value).collect();
        let hand = 2.0 * (f[1] - f[2]).max(f[1] - f[4]) / 2500.0;
        assert!((rel - hand).abs() < 1e-15);
        let (spurious, w) = has_spurious_minima(&g);
        assert!(spurious);
        assert_eq!(w, [2, 4]);
    }

    #[test]
    fn camel_point_energy_near_middle_minimum() {
        let obj = ThreeHumpCamelVariant::default();
        let (cps, g) = closed(&obj);
        let report = EnergyReport::compute(&g).unwrap();
        let e = energy_from_point(&g, &report, &obj, &cps, &[0.05, 0.05], &FlowConfig::default()).unwrap();
        assert_eq!(e, report.relative_of(2));
        let e0 = energy_from_point(&g, &report, &obj, &cps, &[-2.4, 1.0], &FlowConfig::default()).unwrap();
        assert_eq!(e0, 0.0);
    }

    #[test]
    fn three_node_point_energy() {
        let inf = f64::INFINITY;
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, inf, inf], vec![1.0, 0.0, 2.0], vec![4.0, 0.5, 0.0]],
            vec![0],
        );
        let report = EnergyReport::compute(&g).unwrap();
        // E(T‖1) = 1.5 − 0.5, E(T‖2) = 1.0
        assert_eq!(energy_from_attractor(&g, &report, 1), 1.0);
    }

    #[test]
    fn himmelblau_has_no_energy() {
        let obj = Himmelblau::default();
        let (_, g) = closed(&obj);
        let report = EnergyReport::compute(&g).unwrap();
        assert_eq!(report.energy_t, 0.0);
        assert!(report.relative.values().all(|r| *r == 0.0));
        assert!(!has_spurious_minima(&g).0);
    }

    #[test]
    fn bowl_is_trivial() {
        let obj = QuadraticBowl::new(2);
        let (_, g) = closed(&obj);
        let report = EnergyReport::compute(&g).unwrap();
        assert_eq!(report.energy_t, 0.0);
        assert!(report.pruned.is_empty());
        assert!(!has_spurious_minima(&g).0);
    }

    #[test]
    fn camel_bottleneck_attained_on_outer_minimum() {
        let obj = ThreeHumpCamelVariant::default();
        let (_, g) = closed(&obj);
        let ng = NeighborGraph::from_graph(&g);
        let (r, _) = pruned_energy(&g, 2).unwrap();
        let b = bottleneck_bound(&ng, 2, r, 2500.0, 2500.0).unwrap();
        assert_eq!(b.maximizer, 4);
        assert_eq!(b.path, [4, 2, 0]);
        let rel = relative_energy(&g, 2).unwrap();
        assert!((b.bound - rel).abs() < 1e-15, "{} vs {rel}", b.bound);
    }

    #[test]
    fn report_serializations() {
        let inf = f64::INFINITY;
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, inf, inf], vec![1.0, 0.0, 2.0], vec![4.0, 0.5, 0.0]],
            vec![0],
        );
        let report = EnergyReport::compute(&g).unwrap();
        assert_eq!(report.to_csv(), "node,pruned_energy,relative_energy\n1,0.5,1\n2,0.5,1\n");
        assert!(report.to_text().contains("forest: 1->0 2->1"));
    }
}
