use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{LeastSquaresData, Problem, ProblemError};

/// Named desk-scale test problems.
pub struct Registry {
    problems: BTreeMap<String, Problem>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut registry = Registry {
            problems: BTreeMap::new(),
        };
        registry.insert(sphere_linear());
        registry.insert(separable_quadratic(&SeparableQuadratic::default()).expect("valid"));
        registry.insert(rosenbrock_circle());
        registry.insert(lsq_simplex(Arc::new(default_lsq_data())).expect("valid"));
        registry
    }
}

impl Registry {
    pub fn insert(&mut self, problem: Problem) {
        self.problems.insert(problem.name().to_string(), problem);
    }

    pub fn names(&self) -> Vec<String> {
        self.problems.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<Problem, ProblemError> {
        self.problems
            .get(name)
            .cloned()
            .ok_or_else(|| ProblemError::UnknownProblem {
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Problem> {
        self.problems.values()
    }

    /// The finite-sum least-squares problem with data read from a CSV file.
    pub fn lsq_simplex_from_csv(path: &std::path::Path) -> Result<Problem, ProblemError> {
        lsq_simplex(Arc::new(LeastSquaresData::from_csv(path)?))
    }
}

/// `min x₁ + x₂` s.t. `x₁² + x₂² = 2`, `−2 <= x <= 2`.
///
/// KKT point `(−1, −1)` with multiplier `1/2`.
pub fn sphere_linear() -> Problem {
    Problem::builder("sphere-linear", 2, 1)
        .bounds(DVector::from_element(2, -2.0), DVector::from_element(2, 2.0))
        .start(DVector::from_vec(vec![1.5, -0.5]))
        .constraints(
            |x| DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 2.0]),
            |x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
        )
        .gradient(|_x| DVector::from_vec(vec![1.0, 1.0]))
        .objective(|x| x[0] + x[1])
        .hessian(|_x| DMatrix::zeros(2, 2))
        .solution(DVector::from_vec(vec![-1.0, -1.0]))
        .build()
        .expect("sphere-linear is well formed")
}

/// `min ½ Σ wᵢ (xᵢ − tᵢ)²` s.t. `aᵀx = b`, `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
    pub normal: Vec<f64>,
    pub rhs: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for SeparableQuadratic {
    /// At the solution `(1, −1, 1.2, 0.3)` the first two variables sit strictly
    /// at their bounds and the equality multiplier is `0.8`.
    fn default() -> Self {
        Self {
            weights: vec![1.0, 2.0, 1.0, 4.0],
            targets: vec![4.0, -1.0, 2.0, 0.5],
            normal: vec![1.0, 1.0, 1.0, 1.0],
            rhs: 1.5,
            lower: vec![-1.0, -1.0, f64::NEG_INFINITY, 0.0],
            upper: vec![1.0, 2.0, 1.5, f64::INFINITY],
        }
    }
}

pub fn separable_quadratic(spec: &SeparableQuadratic) -> Result<Problem, ProblemError> {
    let n = spec.weights.len();
    let w = DVector::from_vec(spec.weights.clone());
    let t = DVector::from_vec(spec.targets.clone());
    let a = DVector::from_vec(spec.normal.clone());
    let b = spec.rhs;
    let is_default = *spec == SeparableQuadratic::default();
    let (wg, tg) = (w.clone(), t.clone());
    let (wf, tf) = (w.clone(), t.clone());
    let ac = a.clone();
    let aj = a.clone();
    let mut builder = Problem::builder("separable-quadratic", n, 1)
        .bounds(
            DVector::from_vec(spec.lower.clone()),
            DVector::from_vec(spec.upper.clone()),
        )
        .constraints(
            move |x| DVector::from_vec(vec![ac.dot(x) - b]),
            move |_x| DMatrix::from_row_slice(1, aj.len(), aj.as_slice()),
        )
        .gradient(move |x| (x - &tg).component_mul(&wg))
        .objective(move |x| 0.5 * (x - &tf).component_mul(&(x - &tf)).dot(&wf))
        .hessian(move |_x| DMatrix::from_diagonal(&w));
    if is_default {
        builder = builder.solution(DVector::from_vec(vec![1.0, -1.0, 1.2, 0.3]));
    }
    builder.build()
}

/// Rosenbrock objective on the unit circle, `0.1 <= x <= 1.5` keeps the
/// Jacobian away from zero.
pub fn rosenbrock_circle() -> Problem {
    Problem::builder("rosenbrock-circle", 2, 1)
        .bounds(DVector::from_element(2, 0.1), DVector::from_element(2, 1.5))
        .start(DVector::from_vec(vec![0.3, 1.2]))
        .constraints(
            |x| DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 1.0]),
            |x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
        )
        .gradient(|x| {
            let r = x[1] - x[0] * x[0];
            DVector::from_vec(vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * r, 200.0 * r])
        })
        .objective(|x| {
            let r = x[1] - x[0] * x[0];
            (1.0 - x[0]).powi(2) + 100.0 * r * r
        })
        .hessian(|x| {
            let h11 = 2.0 - 400.0 * (x[1] - x[0] * x[0]) + 800.0 * x[0] * x[0];
            let h12 = -400.0 * x[0];
            DMatrix::from_row_slice(2, 2, &[h11, h12, h12, 200.0])
        })
        .solution(DVector::from_vec(vec![0.786_415_154_168_427_9, 0.617_698_312_523_393_5]))
        .build()
        .expect("rosenbrock-circle is well formed")
}

pub fn default_lsq_data() -> LeastSquaresData {
    LeastSquaresData::synthetic(
        200,
        &DVector::from_vec(vec![0.5, 0.35, 0.25, -0.2, 0.1]),
        0.1,
        2024,
    )
}

/// Finite-sum least squares over the probability simplex `Σx = 1, x >= 0`.
pub fn lsq_simplex(data: Arc<LeastSquaresData>) -> Result<Problem, ProblemError> {
    let n = data.dim();
    let objective_data = Arc::clone(&data);
    let hessian = data.hessian();
    Problem::builder("lsq-simplex", n, 1)
        .bounds(DVector::zeros(n), DVector::from_element(n, f64::INFINITY))
        .start(DVector::from_element(n, 1.0 / n as f64))
        .constraints(
            |x| DVector::from_vec(vec![x.sum() - 1.0]),
            move |_x| DMatrix::from_element(1, n, 1.0),
        )
        .objective(move |x| objective_data.objective(x))
        .hessian(move |_x| hessian.clone())
        .finite_sum(data)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{GradientOracle, NoiseModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_contains_the_four_families() {
        let names = Registry::default().names();
        for want in [
            "sphere-linear",
            "separable-quadratic",
            "rosenbrock-circle",
            "lsq-simplex",
        ] {
            assert!(names.iter().any(|n| n == want), "{want}");
        }
    }

    #[test]
    fn unknown_name_lists_registry() {
        let err = Registry::default().get("nosuch").unwrap_err();
        match err {
            ProblemError::UnknownProblem { name, available } => {
                assert_eq!(name, "nosuch");
                assert_eq!(available.len(), 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sphere_values_at_one_one() {
        let p = sphere_linear();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let mut oracle = GradientOracle::new(NoiseModel::Exact, 0);
        let s = p.evaluate(&mut oracle, &x).unwrap();
        assert_eq!(s.c[0], 0.0);
        assert_eq!(s.jacobian, DMatrix::from_row_slice(1, 2, &[2.0, 2.0]));
        let fd = p.fd_jacobian(&x, 1e-6).unwrap();
        assert!((fd - s.jacobian).norm() < 1e-8);
    }

    #[test]
    fn jacobians_and_gradients_agree_with_finite_differences() {
        let registry = Registry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in registry.iter() {
            for _ in 0..100 {
                let x = DVector::from_fn(p.dim(), |i, _| {
                    let lo = p.lower()[i].max(-3.0);
                    let hi = p.upper()[i].min(3.0);
                    rng.random_range(lo..=hi)
                });
                let j = p.jacobian(&x).unwrap();
                let fd = p.fd_jacobian(&x, 1e-6).unwrap();
                let scale = j.norm().max(1.0);
                assert!((&fd - &j).norm() <= 1e-5 * scale, "{} J at {x}", p.name());
                let g = p.true_gradient(&x).unwrap().unwrap();
                let fdg = p.fd_gradient(&x, 1e-6).unwrap();
                assert!(
                    (&fdg - &g).norm() <= 1e-5 * g.norm().max(1.0),
                    "{} G at {x}",
                    p.name()
                );
            }
        }
    }

    #[test]
    fn known_solutions_are_feasible_and_stationary() {
        let registry = Registry::default();
        // sphere-linear: G + λ Jᵀ = 0 with λ = 1/2.
        let p = registry.get("sphere-linear").unwrap();
        let x = p.solution().unwrap().clone();
        let g = p.true_gradient(&x).unwrap().unwrap();
        let j = p.jacobian(&x).unwrap();
        assert_eq!(p.constraint_value(&x).unwrap()[0], 0.0);
        assert!((g + j.transpose() * 0.5).norm() < 1e-15);

        // separable-quadratic: free components satisfy wᵢ(xᵢ − tᵢ) + 0.8 = 0.
        let p = registry.get("separable-quadratic").unwrap();
        let x = p.solution().unwrap().clone();
        let g = p.true_gradient(&x).unwrap().unwrap();
        assert!(p.constraint_value(&x).unwrap()[0].abs() < 1e-15);
        assert!((g[2] + 0.8).abs() < 1e-12 && (g[3] + 0.8).abs() < 1e-12);
        // Active upper bound on x₁ needs g₁ + λ <= 0, active lower on x₂ needs >= 0.
        assert!(g[0] + 0.8 < 0.0 && g[1] + 0.8 > 0.0);

        // rosenbrock-circle: least-squares multiplier annihilates the gradient.
        let p = registry.get("rosenbrock-circle").unwrap();
        let x = p.solution().unwrap().clone();
        let g = p.true_gradient(&x).unwrap().unwrap();
        let j = p.jacobian(&x).unwrap();
        let lambda = -(j.row(0).dot(&g.transpose())) / j.row(0).norm_squared();
        assert!((g + j.transpose() * lambda).norm() < 1e-9);
        assert!(p.constraint_value(&x).unwrap()[0].abs() < 1e-14);
    }
}
