//! Objectives, critical points, and gradient-flow connectivity.

mod critical;
mod flow;
mod objective;

pub use critical::{
    classify, eig_tolerance, find_critical_points, write_critical_points_csv, CriticalKind,
    CriticalPoint, CriticalPointSet,
};
pub use flow::{
    basin_of, integrate_descent, saddle_connections, FlowConfig, FlowEnd, SaddleConnection,
};
pub use objective::{
    DomainBox, Himmelblau, Monomial, Objective, ObjectiveRegistry, Polynomial, QuadraticBowl,
    StyblinskiTang, ThreeHumpCamelVariant,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("unknown objective '{0}'")]
    UnknownObjective(String),
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
    #[error("grid density must be at least 2 per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("Newton iteration did not converge from any seed")]
    NoConvergence,
    #[error("degenerate critical point at {location:?} (Hessian eigenvalues {eigenvalues:?})")]
    DegenerateCritical {
        location: Vec<f64>,
        eigenvalues: Vec<f64>,
    },
    #[error("point {0:?} lies outside the domain box")]
    OutsideDomain(Vec<f64>),
    #[error("gradient flow left the expanded domain box at {0:?}")]
    FlowDiverged(Vec<f64>),
    #[error("gradient flow stalled at {0:?} without reaching a known critical point")]
    FlowStalled(Vec<f64>),
    #[error("flow from critical point {source_id} along an unstable direction was not captured")]
    UnresolvedConnection { source_id: usize },
}
