//! Objective-function-free stochastic trust-funnel solver with AdaGrad
//! stepsizes for `min E[f(x)]` subject to `c(x) = 0` and `lo <= x <= hi`.
//!
//! The crate root re-exports the types shared by the command-line front end
//! and the benchmarks.

// `!(a <= b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod problem;
pub mod projections;
pub mod solver;
pub mod steps;
pub mod vecops;
pub mod verify;

pub use diagnostics::{
    check_lemma_inequalities, compute_measures, lyapunov, rate_fit, DiagnosticsError, Inequality, LemmaReport,
    Measures, RateFit,
};
pub use problem::{GradientOracle, HessianKind, NoiseModel, Problem, ProblemError, Registry};
pub use projections::{project_tangent_box, project_tangent_two_boxes, ProjectionError, TangentBoxSet, TangentSpace};
pub use solver::{solve, Branch, NormalAtSwitch, SolveError, SolveOutcome, SolverConfig, Status, StepDiagnostics, Trace};
pub use steps::ZeroDirectionWidth;
pub use verify::{run_suite, SuiteOptions, SuiteReport, SuiteSection};
