//! Seeded Monte Carlo checks of the predicted divergence rates.
//!
//! Every replication at sample size `T` draws from its own substream keyed by
//! `(seed, T, rep)`, so results are bit-identical under any thread count.

pub mod experiment;
pub mod linalg;
pub mod model;
pub mod stats;
pub mod stream;
pub mod wald;

use thiserror::Error;

use crate::rates::RatesError;
use crate::restriction::RestrictionError;

pub use experiment::{
    divergence_experiment, mu_t, scaled_eigen_trajectory, unscaled_eigen_trajectory, vanishing_rate_experiment,
    ExperimentConfig, ScalingPlan, SimResult, Trajectory, VanishingResult,
};
pub use linalg::symmetric_eigenvalues;
pub use model::{EstimatorModel, VhatMode};
pub use wald::{closed_form_example1, wald_statistic, CompiledSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("Cholesky factorization failed at pivot {pivot} (value {value:e})")]
    Cholesky { pivot: usize, value: f64 },
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("singular metric matrix (condition number {condition:e})")]
    SingularMetric { condition: f64 },
    #[error("singular metric on {:.1}% of draws at T = {t}", fraction * 100.0)]
    SingularFraction { t: u64, fraction: f64 },
    #[error("perturbed V-hat was not positive definite after {attempts} attempts at T = {t}")]
    VhatNotPositiveDefinite { t: u64, attempts: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("need at least {min} replications, got {reps}")]
    TooFewReps { reps: usize, min: usize },
    #[error("precondition not met: {0}")]
    PreconditionUnmet(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    #[error(transparent)]
    Rates(#[from] RatesError),
}
