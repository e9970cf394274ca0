use std::collections::BTreeMap;

use super::EnergyError;
use crate::graph::TransitionGraph;
use crate::landscape::CriticalKind;

/// Minima joined by their lowest common saddle.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    /// Objective value per minimum id.
    pub values: BTreeMap<usize, f64>,
    /// `f_{a,b}` for neighboring minima, stored for both orders.
    pub barrier: BTreeMap<(usize, usize), f64>,
    pub targets: Vec<usize>,
}

impl NeighborGraph {
    pub fn new(values: BTreeMap<usize, f64>, barriers: &[(usize, usize, f64)], targets: Vec<usize>) -> Self {
        let mut barrier = BTreeMap::new();
        for &(a, b, h) in barriers {
            for key in [(a, b), (b, a)] {
                let e = barrier.entry(key).or_insert(h);
                *e = f64::min(*e, h);
            }
        }
        NeighborGraph {
            values,
            barrier,
            targets,
        }
    }

    /// Neighbor graph of the minima of `g`: two minima are neighbors when a
    /// saddle (or higher critical point) connects directly to both.
    pub fn from_graph(g: &TransitionGraph) -> Self {
        let minima: Vec<usize> = (0..g.len())
            .filter(|&i| g.nodes[i].kind == CriticalKind::Minimum)
            .collect();
        let values = minima.iter().map(|&i| (i, g.nodes[i].value)).collect();
        let mut barriers = Vec::new();
        for s in 0..g.len() {
            if g.nodes[s].kind == CriticalKind::Minimum {
                continue;
            }
            let adj: Vec<usize> = minima.iter().copied().filter(|&m| g.direct[s][m]).collect();
            for (k, &a) in adj.iter().enumerate() {
                for &b in &adj[k + 1..] {
                    barriers.push((a, b, g.nodes[s].value));
                }
            }
        }
        let targets = g.targets.iter().copied().filter(|t| minima.contains(t)).collect();
        NeighborGraph::new(values, &barriers, targets)
    }

    fn neighbors(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.barrier
            .range((a, 0)..=(a, usize::MAX))
            .map(|(&(_, b), &h)| (b, h))
    }

    fn is_target(&self, a: usize) -> bool {
        self.targets.contains(&a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckBound {
    /// `2 · max_j min_P c(P) / σ_low²`.
    pub bound: f64,
    /// Maximizing candidate and its optimal path to the targets.
    pub maximizer: usize,
    pub path: Vec<usize>,
    /// Candidates admitted by the radius test.
    pub candidates: Vec<usize>,
}

/// Cheapest chained lower-bound cost `Σ 2(f_ab − f_a)/σ_up²` from `start` to
/// every minimum, over simple neighbor paths.
pub fn lower_costs(ng: &NeighborGraph, start: usize, var_up: f64) -> BTreeMap<usize, f64> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    let mut on_path = vec![start];
    fn dfs(
        ng: &NeighborGraph,
        a: usize,
        acc: f64,
        var_up: f64,
        on_path: &mut Vec<usize>,
        best: &mut BTreeMap<usize, f64>,
    ) {
        let e = best.entry(a).or_insert(f64::INFINITY);
        if acc < *e {
            *e = acc;
        }
        let hops: Vec<(usize, f64)> = ng.neighbors(a).collect();
        for (b, h) in hops {
            if on_path.contains(&b) {
                continue;
            }
            on_path.push(b);
            let step = 2.0 * (h - ng.values[&a]).max(0.0) / var_up;
            dfs(ng, b, acc + step, var_up, on_path, best);
            on_path.pop();
        }
    }
    dfs(ng, start, 0.0, var_up, &mut on_path, &mut best);
    best
}

/// Minimax path from `j` to the targets under hop weight
/// `max(f_ab − f_a, f_ab − f_j)`, by bottleneck Dijkstra.
fn minimax_to_targets(ng: &NeighborGraph, j: usize) -> Option<(f64, Vec<usize>)> {
    let fj = ng.values[&j];
    let mut dist: BTreeMap<usize, f64> = ng.values.keys().map(|&k| (k, f64::INFINITY)).collect();
    let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
    let mut done: Vec<usize> = Vec::new();
    dist.insert(j, 0.0);
    loop {
        let next = dist
            .iter()
            .filter(|(k, d)| !done.contains(k) && d.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
            .map(|(&k, &d)| (k, d));
        let (a, da) = next?;
        if ng.is_target(a) {
            let mut path = vec![a];
            while let Some(&p) = prev.get(path.last().unwrap()) {
                path.push(p);
            }
            path.reverse();
            return Some((da, path));
        }
        done.push(a);
        let fa = ng.values[&a];
        for (b, h) in ng.neighbors(a) {
            let w = da.max((h - fa).max(h - fj));
            if w < dist[&b] {
                dist.insert(b, w);
                prev.insert(b, a);
            }
        }
    }
}

/// Upper bound on the global convergence exponent from `start`: the worst
/// minimax barrier over minima reachable from `start` within lower-bound
/// cost `r`.
pub fn bottleneck_bound(
    ng: &NeighborGraph,
    start: usize,
    r: f64,
    var_low: f64,
    var_up: f64,
) -> Result<BottleneckBound, EnergyError> {
    if !ng.values.contains_key(&start) {
        return Err(EnergyError::InvalidStart(start));
    }
    if ng.is_target(start) {
        return Ok(BottleneckBound {
            bound: 0.0,
            maximizer: start,
            path: vec![start],
            candidates: vec![start],
        });
    }
    let reach = lower_costs(ng, start, var_up);
    let limit = r * (1.0 + 1e-9) + 1e-300;
    let candidates: Vec<usize> = reach
        .iter()
        .filter(|(_, &c)| c <= limit)
        .map(|(&j, _)| j)
        .collect();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for &j in &candidates {
        let (c, path) = minimax_to_targets(ng, j).ok_or(EnergyError::DisconnectedNeighborGraph(j))?;
        if best.as_ref().map_or(true, |b| c > b.0) {
            best = Some((c, j, path));
        }
    }
    let (c, maximizer, path) = best.expect("start is always a candidate");
    Ok(BottleneckBound {
        bound: 2.0 * c / var_low,
        maximizer,
        path,
        candidates,
    })
}
