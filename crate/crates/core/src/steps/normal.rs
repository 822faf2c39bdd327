use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::problem::{Problem, ProblemError};
use crate::vecops;

#[derive(Debug, Clone, Serialize)]
pub struct NormalStepResult {
    pub s_n: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub c_plus: Vec<f64>,
    /// `½‖c‖² − ½‖c + J s_N‖²`.
    pub model_decrease: f64,
    pub half_csq_before: f64,
    pub half_csq_after: f64,
    pub omega_n: f64,
    /// Constraint evaluations spent in the search.
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub enum NormalStepOutcome {
    Accepted(NormalStepResult),
    /// No trial met the sufficient-decrease requirement within the budget.
    Infeasible {
        best_decrease: f64,
        required: f64,
        evaluations: usize,
    },
}

/// Projected Gauss-Newton Cauchy search on `½‖c(x + s)‖²`.
///
/// Trials are `s(t) = clamp(−t Jᵀc)` over the box `ℓ − x <= s <= u − x`
/// intersected with `‖s‖_∞ <= θ_N ω_N`, starting from the unconstrained
/// Gauss-Newton minimizer `t₀ = ‖Jᵀc‖² / ‖J Jᵀc‖²` and halving `t`. A trial
/// is accepted when the actual value drops by at least `κ_n ω_N²`.
#[allow(clippy::too_many_arguments)]
pub fn normal_step(
    problem: &Problem,
    x: &DVector<f64>,
    c: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    theta_n: f64,
    kappa_n: f64,
    budget: usize,
) -> Result<NormalStepOutcome, ProblemError> {
    let v = jacobian.transpose() * c;
    let omega = v.norm();
    let half_before = 0.5 * c.norm_squared();
    if omega == 0.0 {
        return Ok(NormalStepOutcome::Accepted(NormalStepResult {
            s_n: vec![0.0; x.len()],
            x_plus: x.as_slice().to_vec(),
            c_plus: c.as_slice().to_vec(),
            model_decrease: 0.0,
            half_csq_before: half_before,
            half_csq_after: half_before,
            omega_n: 0.0,
            inner_iterations: 0,
        }));
    }
    let cap = theta_n * omega;
    let lo = (problem.lower() - x).map(|l| l.max(-cap));
    let hi = (problem.upper() - x).map(|u| u.min(cap));
    let jv = jacobian * &v;
    let mut t = if jv.norm_squared() > 0.0 {
        v.norm_squared() / jv.norm_squared()
    } else {
        cap / v.amax()
    };
    let required = kappa_n * omega * omega;
    let mut best = f64::NEG_INFINITY;
    for evaluation in 1..=budget.max(1) {
        let trial = vecops::clamp(&(&v * -t), &lo, &hi);
        let x_plus = vecops::clamp(&(x + &trial), problem.lower(), problem.upper());
        let s = &x_plus - x;
        let c_plus = problem.constraint_value(&x_plus)?;
        let half_after = 0.5 * c_plus.norm_squared();
        let decrease = half_before - half_after;
        best = best.max(decrease);
        if decrease >= required {
            let model_decrease = half_before - 0.5 * (c + jacobian * &s).norm_squared();
            return Ok(NormalStepOutcome::Accepted(NormalStepResult {
                s_n: s.as_slice().to_vec(),
                x_plus: x_plus.as_slice().to_vec(),
                c_plus: c_plus.as_slice().to_vec(),
                model_decrease,
                half_csq_before: half_before,
                half_csq_after: half_after,
                omega_n: omega,
                inner_iterations: evaluation,
            }));
        }
        t *= 0.5;
    }
    Ok(NormalStepOutcome::Infeasible {
        best_decrease: best,
        required,
        evaluations: budget.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Registry;

    fn accepted(o: NormalStepOutcome) -> NormalStepResult {
        match o {
            NormalStepOutcome::Accepted(r) => r,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_residual_takes_full_gauss_newton_cauchy_step() {
        // c = 2x₁ + x₂ − 3 from the origin: t₀ = 1/5 gives s = (6/5, 3/5), c⁺ = 0.
        let p = Problem::builder("lin", 2, 1)
            .constraints(
                |x| DVector::from_vec(vec![2.0 * x[0] + x[1] - 3.0]),
                |_| DMatrix::from_row_slice(1, 2, &[2.0, 1.0]),
            )
            .build()
            .unwrap();
        let x = DVector::zeros(2);
        let c = p.constraint_value(&x).unwrap();
        let j = p.jacobian(&x).unwrap();
        let r = accepted(normal_step(&p, &x, &c, &j, 2.0, 1e-4, 31).unwrap());
        assert_eq!(r.inner_iterations, 1);
        assert!((r.s_n[0] - 1.2).abs() < 1e-14 && (r.s_n[1] - 0.6).abs() < 1e-14);
        assert!(r.half_csq_after < 1e-28);
        assert!((r.model_decrease - (r.half_csq_before - r.half_csq_after)).abs() < 1e-12);
    }

    #[test]
    fn sphere_residual_strictly_decreases_from_two_two() {
        let p = Registry::default().get("sphere-linear").unwrap();
        let x = DVector::from_vec(vec![2.0, 2.0]);
        let c = p.constraint_value(&x).unwrap();
        let j = p.jacobian(&x).unwrap();
        let r = accepted(normal_step(&p, &x, &c, &j, 2.0, 1e-4, 31).unwrap());
        assert!((r.omega_n - 24.0 * 2.0_f64.sqrt()).abs() < 1e-12);
        assert!(r.half_csq_after < r.half_csq_before - 1e-4 * r.omega_n.powi(2));
        let cap = 2.0 * r.omega_n;
        assert!(r.s_n.iter().all(|s| s.abs() <= cap));
        assert!(r.x_plus.iter().all(|v| (-2.0..=2.0).contains(v)));
    }

    #[test]
    fn blocked_by_bounds_reports_infeasible() {
        // c = x₁ + 1 at x₁ = 0 with lower bound 0: every trial is clamped to zero.
        let p = Problem::builder("blocked", 1, 1)
            .bounds(DVector::zeros(1), DVector::from_element(1, 1.0))
            .constraints(
                |x| DVector::from_vec(vec![x[0] + 1.0]),
                |_| DMatrix::from_element(1, 1, 1.0),
            )
            .build()
            .unwrap();
        let x = DVector::zeros(1);
        let c = p.constraint_value(&x).unwrap();
        let j = p.jacobian(&x).unwrap();
        match normal_step(&p, &x, &c, &j, 2.0, 1e-4, 5).unwrap() {
            NormalStepOutcome::Infeasible {
                best_decrease,
                evaluations,
                ..
            } => {
                assert_eq!(best_decrease, 0.0);
                assert_eq!(evaluations, 5);
            }
            other => panic!("{other:?}"),
        }
    }
}
