use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EnergyError;
use crate::graph::TransitionGraph;

/// Largest number of non-target nodes handled by exhaustive enumeration.
pub const MAX_NON_TARGETS: usize = 10;

/// One out-edge per non-target node, acyclic, draining into the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionForest {
    pub out_edge: BTreeMap<usize, usize>,
    pub cost: f64,
}

/// `|V \ T| − 1` out-edges with no path from `start` to the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pruning {
    pub start: usize,
    /// The non-target node left without an out-edge.
    pub open_node: usize,
    pub out_edge: BTreeMap<usize, usize>,
    pub cost: f64,
}

/// Depth-first search over out-edge assignments with branch and bound.
///
/// Nodes are assigned in ascending order and candidate heads are tried in
/// ascending order, so the first optimum found is the lexicographically
/// smallest. Costs accumulate in node order.
struct Search<'a> {
    g: &'a TransitionGraph,
    nodes: Vec<usize>,
    /// Finite-cost candidate heads per entry of `nodes`.
    candidates: Vec<Vec<(usize, f64)>>,
    /// `suffix_lb[k]`: sum of the cheapest out-edges of `nodes[k..]`.
    suffix_lb: Vec<f64>,
    head: Vec<Option<usize>>,
    best: Option<(f64, Vec<Option<usize>>)>,
    /// Extra acceptance test on complete assignments.
    accept: &'a dyn Fn(&[Option<usize>]) -> bool,
    /// Prunes partial assignments that can no longer be accepted.
    viable: &'a dyn Fn(&[Option<usize>]) -> bool,
    bound: bool,
    count: u64,
}

impl<'a> Search<'a> {
    fn new(
        g: &'a TransitionGraph,
        nodes: Vec<usize>,
        accept: &'a dyn Fn(&[Option<usize>]) -> bool,
        viable: &'a dyn Fn(&[Option<usize>]) -> bool,
        bound: bool,
    ) -> Self {
        let n = g.len();
        let candidates: Vec<Vec<(usize, f64)>> = nodes
            .iter()
            .map(|&i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| g.q[i][j].finite().map(|c| (j, c)))
                    .collect()
            })
            .collect();
        let mut suffix_lb = vec![0.0; nodes.len() + 1];
        for k in (0..nodes.len()).rev() {
            let cheapest = candidates[k]
                .iter()
                .map(|c| c.1)
                .fold(f64::INFINITY, f64::min);
            suffix_lb[k] = suffix_lb[k + 1] + cheapest;
        }
        Search {
            g,
            nodes,
            candidates,
            suffix_lb,
            head: vec![None; n],
            best: None,
            accept,
            viable,
            bound,
            count: 0,
        }
    }

    /// Following heads from `from` returns to `target`.
    fn reaches(&self, from: usize, target: usize) -> bool {
        let mut x = from;
        for _ in 0..=self.g.len() {
            if x == target {
                return true;
            }
            match self.head[x] {
                Some(h) => x = h,
                None => return false,
            }
        }
        false
    }

    fn run(&mut self, k: usize, partial: f64) {
        if k == self.nodes.len() {
            if (self.accept)(&self.head) {
                self.count += 1;
                let better = match &self.best {
                    Some((b, _)) => partial < *b,
                    None => true,
                };
                if better {
                    self.best = Some((partial, self.head.clone()));
                }
            }
            return;
        }
        if self.bound {
            if let Some((b, _)) = &self.best {
                if partial + self.suffix_lb[k] > b + 1e-9 * (b.abs() + 1.0) {
                    return;
                }
            }
        }
        let i = self.nodes[k];
        for idx in 0..self.candidates[k].len() {
            let (j, c) = self.candidates[k][idx];
            if self.reaches(j, i) {
                continue;
            }
            self.head[i] = Some(j);
            if (self.viable)(&self.head) {
                self.run(k + 1, partial + c);
            }
            self.head[i] = None;
        }
    }
}

fn check_size(g: &TransitionGraph) -> Result<Vec<usize>, EnergyError> {
    let nt = g.non_targets();
    if nt.len() > MAX_NON_TARGETS {
        return Err(EnergyError::TooLarge(nt.len()));
    }
    if g.targets.is_empty() {
        return Err(EnergyError::Infeasible);
    }
    Ok(nt)
}

fn to_map(head: &[Option<usize>]) -> BTreeMap<usize, usize> {
    head.iter()
        .enumerate()
        .filter_map(|(i, h)| h.map(|j| (i, j)))
        .collect()
}

/// `E(T)`: the cheapest transition forest, with its witness.
pub fn energy(g: &TransitionGraph) -> Result<(f64, TransitionForest), EnergyError> {
    let nt = check_size(g)?;
    let yes = |_: &[Option<usize>]| true;
    let mut s = Search::new(g, nt, &yes, &yes, true);
    s.run(0, 0.0);
    let (cost, head) = s.best.ok_or(EnergyError::Infeasible)?;
    Ok((
        cost,
        TransitionForest {
            out_edge: to_map(&head),
            cost,
        },
    ))
}

/// Number of valid transition forests (no bounding).
pub fn count_forests(g: &TransitionGraph) -> Result<u64, EnergyError> {
    let nt = check_size(g)?;
    let yes = |_: &[Option<usize>]| true;
    let mut s = Search::new(g, nt, &yes, &yes, false);
    s.run(0, 0.0);
    Ok(s.count)
}

/// Chain from `start` ends at `open` rather than at a target.
fn chain_ends_at(head: &[Option<usize>], start: usize, open: usize, n: usize) -> Option<bool> {
    let mut x = start;
    for _ in 0..=n {
        if x == open {
            return Some(true);
        }
        match head[x] {
            Some(h) => x = h,
            // an unassigned node other than `open`: undecided
            None => return None,
        }
    }
    Some(false)
}

/// `E(start ↛ T)`: the cheapest pruning of `start` from the targets.
pub fn pruned_energy(g: &TransitionGraph, start: usize) -> Result<(f64, Pruning), EnergyError> {
    let nt = check_size(g)?;
    if start >= g.len() || g.is_target(start) {
        return Err(EnergyError::InvalidStart(start));
    }
    let n = g.len();
    let mut best: Option<(f64, usize, Vec<Option<usize>>)> = None;
    for &open in &nt {
        let rest: Vec<usize> = nt.iter().copied().filter(|&i| i != open).collect();
        let is_target = |x: usize| g.is_target(x);
        let accept = move |head: &[Option<usize>]| chain_ends_at(head, start, open, n) == Some(true);
        // the chain from start must not hit a target early
        let viable = move |head: &[Option<usize>]| {
            let mut x = start;
            for _ in 0..=n {
                if x == open {
                    return true;
                }
                if is_target(x) {
                    return false;
                }
                match head[x] {
                    Some(h) => x = h,
                    None => return true,
                }
            }
            true
        };
        let mut s = Search::new(g, rest, &accept, &viable, true);
        if let Some((b, _, _)) = &best {
            s.best = Some((*b, Vec::new()));
        }
        s.run(0, 0.0);
        if let Some((cost, head)) = s.best {
            if !head.is_empty() {
                best = Some((cost, open, head));
            }
        }
    }
    let (cost, open, head) = best.ok_or(EnergyError::Infeasible)?;
    Ok((
        cost,
        Pruning {
            start,
            open_node: open,
            out_edge: to_map(&head),
            cost,
        },
    ))
}

/// `E(T‖start) = E(T) − E(start ↛ T)`.
pub fn relative_energy(g: &TransitionGraph, start: usize) -> Result<f64, EnergyError> {
    if g.is_target(start) {
        return Ok(0.0);
    }
    let (e, _) = energy(g)?;
    let (p, _) = pruned_energy(g, start)?;
    Ok((e - p).max(0.0))
}

/// Σ `Q[i][head(i)]` in node order, or `None` when an edge is infinite.
pub fn score(g: &TransitionGraph, out_edge: &BTreeMap<usize, usize>) -> Option<f64> {
    let mut s = 0.0;
    for (&i, &j) in out_edge {
        s += g.q[i][j].finite()?;
    }
    Some(s)
}
