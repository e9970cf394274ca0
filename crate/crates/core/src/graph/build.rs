use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{nodes_from, Cost, GraphError, TransitionGraph};
use crate::landscape::{CriticalPointSet, Objective, SaddleConnection};
use crate::ldp::{minimize_action, potential_transform, LdpError, MamConfig, NoiseModel};

/// Everything an edge-cost model may need.
pub struct EdgeContext<'a> {
    pub obj: &'a dyn Objective,
    pub cps: &'a CriticalPointSet,
    pub conns: &'a [SaddleConnection],
    pub noise: &'a dyn NoiseModel,
    pub mam: &'a MamConfig,
}

/// Cost of one directed direct edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimate {
    pub from: usize,
    pub to: usize,
    /// Value stored in `Q`.
    pub cost: f64,
    /// Numeric action estimate, when one was computed.
    pub raw: Option<f64>,
    /// The estimate is only an upper bound (optimizer did not converge).
    pub flagged: bool,
}

pub trait EdgeCostModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Costs for `edges`, in the same order.
    fn costs(&self, ctx: &EdgeContext, edges: &[(usize, usize)]) -> Result<Vec<EdgeEstimate>, GraphError>;
}

/// Sorted directed edges: both orientations of every saddle connection.
pub fn direct_edges(conns: &[SaddleConnection]) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for c in conns {
        for e in c.endpoint_ids {
            if e != c.saddle_id {
                set.insert((c.saddle_id, e));
                set.insert((e, c.saddle_id));
            }
        }
    }
    set.into_iter().collect()
}

/// Critical-value differences: `2(f_j − f_i)₊/σ²` for Gaussian noise and
/// the potential difference `(Φ(f_j) − Φ(f_i))₊` for value-dependent variance.
#[derive(Debug, Default)]
pub struct ClosedFormCost;

impl EdgeCostModel for ClosedFormCost {
    fn name(&self) -> &'static str {
        "closed_form"
    }

    fn costs(&self, ctx: &EdgeContext, edges: &[(usize, usize)]) -> Result<Vec<EdgeEstimate>, GraphError> {
        let noise = ctx.noise;
        let kind = noise.kind();
        if kind != "isotropic_gaussian" && kind != "state_dependent_gaussian" {
            return Err(GraphError::UnsupportedNoise(kind.to_string()));
        }
        edges
            .iter()
            .map(|&(i, j)| {
                let (fi, fj) = (ctx.cps.points[i].value, ctx.cps.points[j].value);
                let cost = if fj <= fi {
                    0.0
                } else if kind == "isotropic_gaussian" {
                    2.0 * (fj - fi) / noise.variance_proxy(fi)
                } else {
                    potential_transform(
                        |z| noise.gaussian_variance(z).unwrap_or(f64::NAN),
                        fi,
                        fj,
                    )?
                };
                Ok(EdgeEstimate {
                    from: i,
                    to: j,
                    cost,
                    raw: None,
                    flagged: false,
                })
            })
            .collect()
    }
}

/// Minimum-action estimates for uphill edges. Downhill edges follow a
/// heteroclinic gradient-flow orbit and cost exactly zero; their numeric
/// estimate is still reported in `raw`.
#[derive(Debug, Default)]
pub struct NumericMamCost;

impl EdgeCostModel for NumericMamCost {
    fn name(&self) -> &'static str {
        "numeric_mam"
    }

    fn costs(&self, ctx: &EdgeContext, edges: &[(usize, usize)]) -> Result<Vec<EdgeEstimate>, GraphError> {
        edges
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&ctx.cps.points[i], &ctx.cps.points[j]);
                let (raw, flagged) =
                    match minimize_action(ctx.obj, ctx.noise, &a.location, &b.location, ctx.mam) {
                        Ok(r) => (r.action, false),
                        Err(LdpError::MaxIterations(r)) => (r.action, true),
                        Err(e) => return Err(GraphError::from(e)),
                    };
                let cost = if b.value <= a.value { 0.0 } else { raw };
                Ok(EdgeEstimate {
                    from: i,
                    to: j,
                    cost,
                    raw: Some(raw),
                    flagged,
                })
            })
            .collect()
    }
}

/// Builds `Q` from the direct edges with `model`; non-adjacent pairs are ∞.
pub fn build_with(
    model: &dyn EdgeCostModel,
    ctx: &EdgeContext,
) -> Result<(TransitionGraph, Vec<EdgeEstimate>), GraphError> {
    let nodes = nodes_from(ctx.cps)?;
    let n = nodes.len();
    let edges = direct_edges(ctx.conns);
    let estimates = model.costs(ctx, &edges)?;
    let mut q = vec![vec![Cost::Infinite; n]; n];
    let mut direct = vec![vec![false; n]; n];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = Cost::Finite(0.0);
    }
    for e in &estimates {
        q[e.from][e.to] = Cost::from_f64(e.cost.max(0.0));
        direct[e.from][e.to] = true;
    }
    Ok((TransitionGraph::from_parts(nodes, q, direct), estimates))
}

/// Closed-form graph for Gaussian or value-dependent Gaussian noise.
pub fn build_graph(
    obj: &dyn Objective,
    cps: &CriticalPointSet,
    conns: &[SaddleConnection],
    noise: &dyn NoiseModel,
) -> Result<TransitionGraph, GraphError> {
    let mam = MamConfig::default();
    let ctx = EdgeContext {
        obj,
        cps,
        conns,
        noise,
        mam: &mam,
    };
    build_with(&ClosedFormCost, &ctx).map(|(g, _)| g)
}

pub fn build_graph_numeric(
    obj: &dyn Objective,
    cps: &CriticalPointSet,
    conns: &[SaddleConnection],
    noise: &dyn NoiseModel,
    mam: &MamConfig,
) -> Result<(TransitionGraph, Vec<EdgeEstimate>), GraphError> {
    let ctx = EdgeContext {
        obj,
        cps,
        conns,
        noise,
        mam,
    };
    build_with(&NumericMamCost, &ctx)
}

/// Edge-cost models selectable by name.
pub struct EdgeCostRegistry {
    entries: BTreeMap<String, Box<dyn EdgeCostModel>>,
}

impl EdgeCostRegistry {
    pub fn empty() -> Self {
        EdgeCostRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(ClosedFormCost));
        reg.register(Box::new(NumericMamCost));
        reg
    }

    pub fn register(&mut self, model: Box<dyn EdgeCostModel>) {
        self.entries.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EdgeCostModel, GraphError> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| GraphError::UnknownCostModel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for EdgeCostRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
