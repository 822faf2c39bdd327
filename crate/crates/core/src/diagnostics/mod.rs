//! Optimality measures, the Lyapunov function, per-iteration inequality
//! checks, noise monitoring and rate estimation over solver traces.

mod lemmas;
mod lyapunov;
mod measures;
mod monte_carlo;
mod noise;
mod rate;

use thiserror::Error;

pub use lemmas::{check_lemma_inequalities, Inequality, LemmaReport, Violation, LEMMA_TOL};
pub use lyapunov::{
    estimate_constants, lyapunov, normal_step_decrease, rho_from_constants, ConstantEstimates, LyapunovRecord,
    NormalDecrease,
};
pub use measures::{compute_measures, compute_measures_at, Measures};
pub use monte_carlo::{monte_carlo_running_average, MonteCarloSummary};
pub use noise::{noise_condition_monitor, NoiseReport};
pub use rate::{mean_curve, rate_fit, rate_fit_series, running_average, RateFit, MIN_RATE_LEN};

use crate::problem::ProblemError;
use crate::projections::ProjectionError;
use crate::solver::SolveError;

#[derive(Debug, Error, Clone)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("trace has {len} iterations, need at least {min}")]
    TraceTooShort { len: usize, min: usize },
    #[error("running average is not positive at index {index}")]
    NonPositiveAverage { index: usize },
    #[error("{0}")]
    Unavailable(String),
}
