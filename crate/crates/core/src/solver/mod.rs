//! The main loop: evaluation, switching test, normal or tangential step,
//! accumulator update and termination.

mod config;
mod trace;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, NormalAtSwitch, SolverConfig};
pub use trace::{Branch, StepDiagnostics, TangentialRecord, Trace};

use crate::diagnostics::Measures;
use crate::problem::{GradientOracle, HessianApprox, Problem, ProblemError};
use crate::projections::{
    project_tangent_box, project_tangent_two_boxes, ProjectionError, TangentBoxSet, TangentSpace,
};
use crate::steps::{normal_step, tangential_step, NormalStepOutcome, StepSizeState};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    InfeasibleNormalStep,
    RankDeficient,
    EvaluationFailed,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::InfeasibleNormalStep => "infeasible_normal_step",
            Status::RankDeficient => "rank_deficient",
            Status::EvaluationFailed => "evaluation_failed",
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(
        "normal step failed at iteration {k}: best decrease {best_decrease:e} < required {required:e}"
    )]
    InfeasibleNormalStep {
        k: usize,
        best_decrease: f64,
        required: f64,
    },
}

impl SolveError {
    fn status(&self) -> Status {
        match self {
            SolveError::Projection(ProjectionError::RankDeficient { .. }) => Status::RankDeficient,
            SolveError::InfeasibleNormalStep { .. } => Status::InfeasibleNormalStep,
            _ => Status::EvaluationFailed,
        }
    }
}

/// Mutable state carried between iterations.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: DVector<f64>,
    pub steps: StepSizeState,
    pub k: usize,
    pub hessian: HessianApprox,
    pub branches: Vec<Branch>,
}

impl IterateState {
    /// Starts from the problem's `x₀`, clamped into the box if needed.
    pub fn new(problem: &Problem, config: &SolverConfig) -> Self {
        Self::from_point(problem, config, problem.x0().clone())
    }

    pub fn from_point(problem: &Problem, config: &SolverConfig, x0: DVector<f64>) -> Self {
        let x = vecops::clamp(&x0, problem.lower(), problem.upper());
        if x != x0 {
            log::warn!("{}: starting point moved into the bounds", problem.name());
        }
        Self {
            x,
            steps: StepSizeState::new(problem.dim(), config.eta, config.varsigma),
            k: 0,
            hessian: HessianApprox::new(config.hessian),
            branches: Vec::new(),
        }
    }

    pub fn theta(&self) -> f64 {
        1.0 + self.steps.gamma().max().max(0.0) / self.steps.varsigma()
    }
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Stepped(Box<StepDiagnostics>),
    Converged(Measures),
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: Status,
    pub x: DVector<f64>,
    pub measures: Option<Measures>,
    pub iterations: usize,
    pub error: Option<String>,
    pub trace: Trace,
}

/// One pass of the loop body at `state.x`.
pub fn step_once(
    state: &mut IterateState,
    problem: &Problem,
    oracle: &mut GradientOracle,
    config: &SolverConfig,
) -> Result<StepOutcome, SolveError> {
    let x = state.x.clone();
    let sample = problem.evaluate(oracle, &x)?;
    state.hessian.observe(&x, &sample.g);
    let space = TangentSpace::new(sample.jacobian.clone())?;
    let set = TangentBoxSet::at(&space, &x, problem.lower(), problem.upper())?;
    let tol = config.projection_tol;

    let d = project_tangent_box(&sample.g, &set, tol)?.point;
    let omega_n = (sample.jacobian.transpose() * &sample.c).norm();
    let c_norm = sample.c.norm();
    let omega_t_true = match (&sample.true_gradient, config.record_true_measure) {
        (Some(truth), true) => Some(project_tangent_box(truth, &set, tol)?.point.norm()),
        _ => None,
    };
    if d.norm() <= config.eps_d && omega_n <= config.eps_c {
        return Ok(StepOutcome::Converged(Measures {
            omega_t: d.norm(),
            omega_t_true,
            omega_n,
            c_norm,
            theta: state.theta(),
        }));
    }

    state.steps.update_stepsizes(&d);
    if let Some(scale) = config.fault_alpha_scale {
        state.steps.scale_alpha(scale);
    }
    let gamma_before = state.steps.gamma().clone();
    let widths = state.steps.trust_widths(&d, config.zero_direction_width);
    let s_l = project_tangent_two_boxes(&sample.g, &set, &-&widths, &widths, tol)?.point;
    let omega_switch = if c_norm <= config.feasibility_floor { 0.0 } else { omega_n };
    let switch = omega_switch <= config.beta * s_l.amax();

    let want_normal = !switch || config.normal_at_switch == NormalAtSwitch::Always;
    let mut normal = None;
    if want_normal && omega_switch > 0.0 {
        match normal_step(
            problem,
            &x,
            &sample.c,
            &sample.jacobian,
            config.theta_n,
            config.kappa_n,
            config.normal_budget,
        )? {
            NormalStepOutcome::Accepted(result) => normal = Some(result),
            NormalStepOutcome::Infeasible {
                best_decrease,
                required,
                ..
            } => {
                if !switch {
                    return Err(SolveError::InfeasibleNormalStep {
                        k: state.k,
                        best_decrease,
                        required,
                    });
                }
                log::debug!("optional normal step skipped at iteration {}", state.k);
            }
        }
    }
    let (x_plus, c_norm_plus) = match &normal {
        Some(n) => (
            DVector::from_row_slice(&n.x_plus),
            DVector::from_row_slice(&n.c_plus).norm(),
        ),
        None => (x.clone(), c_norm),
    };

    let (branch, x_next, tangential) = if switch {
        let b = state.hessian.matrix(problem, &x)?;
        let region = if config.refine {
            Some(set.intersect(&-&widths, &widths)?)
        } else {
            None
        };
        let step = tangential_step(&sample.g, &s_l, &b, config.tau, region.as_ref());
        let x_next = vecops::clamp(&(&x_plus + &step.s_t), problem.lower(), problem.upper());
        state.steps.accumulate_gamma(&d);
        oracle.record_tangential_step(step.s_t.norm());
        let record = TangentialRecord {
            b_norm: crate::problem::norm_estimate(&b),
            s_c: step.s_c,
            s_t: step.s_t,
            gamma_coeff: step.gamma_coeff,
            model_cauchy: step.model_cauchy,
            model_step: step.model_step,
            refined: step.refined,
        };
        (Branch::Tangential, x_next, Some(record))
    } else {
        (Branch::NormalOnly, x_plus.clone(), None)
    };

    let record = StepDiagnostics {
        k: state.k,
        branch,
        x,
        x_plus,
        x_next: x_next.clone(),
        g: sample.g,
        true_gradient: sample.true_gradient,
        c_norm,
        c_norm_plus,
        omega_n,
        d,
        omega_t_true,
        alpha: state.steps.alpha().clone(),
        mu: state.steps.mu(),
        gamma: gamma_before,
        widths,
        s_l,
        normal,
        tangential,
    };
    state.x = x_next;
    state.k += 1;
    state.branches.push(branch);
    Ok(StepOutcome::Stepped(Box::new(record)))
}

/// Runs the method from the problem's starting point.
pub fn solve(
    problem: &Problem,
    oracle: &mut GradientOracle,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    config.validate()?;
    oracle.model().validate()?;
    let mut state = IterateState::new(problem, config);
    let mut records = Vec::new();
    let finish = |state: &IterateState,
                      records: Vec<StepDiagnostics>,
                      status: Status,
                      measures: Option<Measures>,
                      error: Option<String>| SolveOutcome {
        status,
        x: state.x.clone(),
        measures,
        iterations: state.k,
        error,
        trace: Trace {
            problem: problem.name().to_string(),
            lower: problem.lower().clone(),
            upper: problem.upper().clone(),
            config: config.clone(),
            records,
            final_gamma: state.steps.gamma().clone(),
        },
    };
    while state.k < config.max_iter {
        match step_once(&mut state, problem, oracle, config) {
            Ok(StepOutcome::Stepped(record)) => records.push(*record),
            Ok(StepOutcome::Converged(measures)) => {
                return Ok(finish(&state, records, Status::Converged, Some(measures), None));
            }
            Err(err) => {
                log::warn!("{}: stopping at iteration {}: {err}", problem.name(), state.k);
                let status = err.status();
                return Ok(finish(&state, records, status, None, Some(err.to_string())));
            }
        }
    }
    let measures = crate::diagnostics::compute_measures_at(problem, oracle, &state.x, state.theta(), config.projection_tol).ok();
    Ok(finish(&state, records, Status::MaxIter, measures, None))
}
