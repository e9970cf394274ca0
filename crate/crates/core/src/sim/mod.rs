//! Constant step-size SGD simulation and hitting-time experiments.

mod attract;
mod harness;
mod rng;
mod sgd;

pub use attract::{check_attracting_strength, radius_grid, AttractingStrength, RadiusStrength, SHELL_SAMPLES};
pub use harness::{monte_carlo, parse_samples_csv, samples_csv};
pub use rng::{rng_for, run_seed, SimRng};
pub use sgd::{run_to_hit, sgd_step, sgd_step_with_error, subsampled_trace, HittingTimeSample, SgdConfig, StepScratch};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("iterate overflowed")]
    NonFinite,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("samples file: {0}")]
    Parse(String),
}
