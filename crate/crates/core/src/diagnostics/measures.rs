use nalgebra::DVector;
use serde::Serialize;

use super::DiagnosticsError;
use crate::problem::{GradientOracle, Problem};
use crate::projections::{project_tangent_box, TangentBoxSet, TangentSpace, TOL_EQ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measures {
    /// `‖d‖ = ‖P_F[−g]‖`.
    pub omega_t: f64,
    /// `‖P_F[−G]‖`, absent without a true gradient.
    pub omega_t_true: Option<f64>,
    /// `‖Jᵀc‖`.
    pub omega_n: f64,
    pub c_norm: f64,
    /// `1 + max_i Γ_i / ς`.
    pub theta: f64,
}

/// Measures at `x` for a direction `d` already computed by the solver.
pub fn compute_measures(
    problem: &Problem,
    x: &DVector<f64>,
    d: &DVector<f64>,
    gamma: &DVector<f64>,
    varsigma: f64,
) -> Result<Measures, DiagnosticsError> {
    let c = problem.constraint_value(x)?;
    let j = problem.jacobian(x)?;
    let omega_t_true = match problem.true_gradient(x)? {
        Some(truth) => {
            let space = TangentSpace::new(j.clone())?;
            let set = TangentBoxSet::at(&space, x, problem.lower(), problem.upper())?;
            Some(project_tangent_box(&truth, &set, TOL_EQ)?.point.norm())
        }
        None => None,
    };
    Ok(Measures {
        omega_t: d.norm(),
        omega_t_true,
        omega_n: (j.transpose() * &c).norm(),
        c_norm: c.norm(),
        theta: 1.0 + gamma.iter().fold(0.0f64, |a, &b| a.max(b)) / varsigma,
    })
}

/// Measures at `x` with a fresh oracle sample for `d`.
pub fn compute_measures_at(
    problem: &Problem,
    oracle: &mut GradientOracle,
    x: &DVector<f64>,
    theta: f64,
    tol: f64,
) -> Result<Measures, DiagnosticsError> {
    let sample = problem.evaluate(oracle, x)?;
    let space = TangentSpace::new(sample.jacobian.clone())?;
    let set = TangentBoxSet::at(&space, x, problem.lower(), problem.upper())?;
    let d = project_tangent_box(&sample.g, &set, tol)?.point;
    let omega_t_true = match &sample.true_gradient {
        Some(truth) => Some(project_tangent_box(truth, &set, tol)?.point.norm()),
        None => None,
    };
    Ok(Measures {
        omega_t: d.norm(),
        omega_t_true,
        omega_n: (sample.jacobian.transpose() * &sample.c).norm(),
        c_norm: sample.c.norm(),
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{NoiseModel, Registry};

    #[test]
    fn exact_oracle_measures_agree() {
        let p = Registry::default().get("rosenbrock-circle").unwrap();
        let x = DVector::from_vec(vec![0.5, 0.9]);
        let mut o = GradientOracle::new(NoiseModel::Exact, 0);
        let m = compute_measures_at(&p, &mut o, &x, 1.0, TOL_EQ).unwrap();
        assert_eq!(Some(m.omega_t), m.omega_t_true);
    }

    #[test]
    fn sphere_solution_is_certified() {
        let p = Registry::default().get("sphere-linear").unwrap();
        let x = DVector::from_vec(vec![-1.0, -1.0]);
        let m = compute_measures(&p, &x, &DVector::zeros(2), &DVector::zeros(2), 1.0).unwrap();
        assert!(m.omega_t_true.unwrap() <= 1e-8 && m.omega_n <= 1e-8);
        assert_eq!(m.theta, 1.0);
    }

    #[test]
    fn interior_unconstrained_measure_is_gradient_norm() {
        let p = Problem::builder("q", 2, 0)
            .gradient(|x| x * 2.0)
            .build()
            .unwrap();
        let x = DVector::from_vec(vec![0.3, -0.4]);
        let m = compute_measures(&p, &x, &DVector::zeros(2), &DVector::from_vec(vec![3.0, 1.0]), 0.5).unwrap();
        assert!((m.omega_t_true.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.theta, 7.0);
    }

    #[test]
    fn missing_gradient_leaves_true_measure_absent() {
        let p = Problem::builder("blind", 2, 0).build().unwrap();
        let m = compute_measures(&p, &DVector::zeros(2), &DVector::zeros(2), &DVector::zeros(2), 1.0).unwrap();
        assert_eq!(m.omega_t_true, None);
    }
}
