//! Transition graphs over critical points and their chained costs.

mod bounds;
mod build;
mod closure;
mod io;

pub use bounds::{default_probe_paths, interpretable_bounds, upward_jump, EdgeBounds, ProbePaths};
pub use build::{
    build_graph, build_graph_numeric, build_with, direct_edges, ClosedFormCost, EdgeContext,
    EdgeCostModel, EdgeCostRegistry, EdgeEstimate, NumericMamCost,
};
pub use closure::{chain_closure, MAX_CLOSURE_NODES};
pub use io::{emit_dot, parse_graph_csv, write_graph_csv};

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{CriticalKind, CriticalPointSet, LandscapeError};
use crate::ldp::LdpError;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("critical point set is empty")]
    EmptyGraph,
    #[error("node {0} is a degenerate critical point")]
    DegenerateNode(usize),
    #[error("closure left Q[{from}][{to}] infinite: the connection graph is disconnected")]
    StillInfinite { from: usize, to: usize },
    #[error("graph has {0} nodes, more than the closure limit")]
    TooLarge(usize),
    #[error("noise model '{0}' has no closed-form edge cost; use the numeric builder")]
    UnsupportedNoise(String),
    #[error("unknown edge-cost model '{0}'")]
    UnknownCostModel(String),
    #[error("no probe path for edge {from} -> {to}")]
    NoProbePath { from: usize, to: usize },
    #[error("noise model gives no variance bounds for interpretable costs")]
    NoVarianceBounds,
    #[error("target node {0} does not exist")]
    InvalidTarget(usize),
    #[error("malformed graph file: {0}")]
    Parse(String),
    #[error(transparent)]
    Ldp(#[from] LdpError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

/// Non-negative extended-real edge cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn finite(self) -> Option<f64> {
        match self {
            Cost::Finite(v) => Some(v),
            Cost::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    /// `Finite(v)` for finite `v`, `Infinite` for `+∞`.
    pub fn from_f64(v: f64) -> Cost {
        if v.is_finite() {
            Cost::Finite(v)
        } else {
            Cost::Infinite
        }
    }

    pub fn less_than(self, other: Cost) -> bool {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a < b,
            (Cost::Finite(_), Cost::Infinite) => true,
            _ => false,
        }
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(v) => write!(f, "{v}"),
            Cost::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub location: Vec<f64>,
    pub value: f64,
    pub kind: CriticalKind,
}

/// Directed graph of transition costs between critical points.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    pub nodes: Vec<GraphNode>,
    /// `q[i][j]`, with zero diagonal.
    pub q: Vec<Vec<Cost>>,
    /// Direct (saddle-connection) adjacency.
    pub direct: Vec<Vec<bool>>,
    /// Sorted target node ids.
    pub targets: Vec<usize>,
}

/// Ids whose value is within `1e-9 · (1 + |min|)` of the minimum.
pub fn argmin_targets(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + min.abs());
    (0..values.len()).filter(|&i| values[i] <= min + tol).collect()
}

impl TransitionGraph {
    /// Graph with the given direct costs and default targets.
    pub fn from_parts(nodes: Vec<GraphNode>, q: Vec<Vec<Cost>>, direct: Vec<Vec<bool>>) -> Self {
        let values: Vec<f64> = nodes.iter().map(|n| n.value).collect();
        let targets = argmin_targets(&values);
        TransitionGraph {
            nodes,
            q,
            direct,
            targets,
        }
    }

    /// Abstract graph from a cost matrix, for combinatorial work.
    /// `f64::INFINITY` entries become `Infinite`.
    pub fn from_matrix(q: Vec<Vec<f64>>, targets: Vec<usize>) -> Self {
        let n = q.len();
        let nodes = (0..n)
            .map(|id| GraphNode {
                id,
                location: Vec::new(),
                value: if targets.contains(&id) { 0.0 } else { 1.0 },
                kind: CriticalKind::Minimum,
            })
            .collect();
        let direct = q
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| i != j && v.is_finite()).collect())
            .collect();
        let q = q
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| if i == j { Cost::Finite(0.0) } else { Cost::from_f64(v) })
                    .collect()
            })
            .collect();
        let mut targets = targets;
        targets.sort_unstable();
        targets.dedup();
        TransitionGraph {
            nodes,
            q,
            direct,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_target(&self, i: usize) -> bool {
        self.targets.binary_search(&i).is_ok()
    }

    pub fn non_targets(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_target(i)).collect()
    }

    pub fn cost(&self, i: usize, j: usize) -> Cost {
        self.q[i][j]
    }

    /// Replaces the argmin target set, e.g. to aim at a single component.
    pub fn with_targets(mut self, mut targets: Vec<usize>) -> Result<Self, GraphError> {
        if targets.is_empty() {
            return Err(GraphError::InvalidTarget(usize::MAX));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= self.len()) {
            return Err(GraphError::InvalidTarget(bad));
        }
        targets.sort_unstable();
        targets.dedup();
        self.targets = targets;
        Ok(self)
    }

    /// Undirected connectivity of the direct edges.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && (self.direct[i][j] || self.direct[j][i]) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub(crate) fn nodes_from(cps: &CriticalPointSet) -> Result<Vec<GraphNode>, GraphError> {
    if cps.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    cps.iter()
        .map(|p| {
            if p.kind == CriticalKind::Degenerate {
                Err(GraphError::DegenerateNode(p.id))
            } else {
                Ok(GraphNode {
                    id: p.id,
                    location: p.location.clone(),
                    value: p.value,
                    kind: p.kind,
                })
            }
        })
        .collect()
}
