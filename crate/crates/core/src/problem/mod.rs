//! Problem instances, gradient oracles and Hessian approximations.
//!
//! A [`Problem`] bundles the deterministic constraint callbacks `c`, `J`,
//! the bound vectors and, when known, the true objective gradient. The
//! objective value itself is optional and only ever read by diagnostics.

mod finite_sum;
mod hessian;
mod oracle;
mod registry;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use finite_sum::{ComponentGradients, LeastSquaresData};
pub use hessian::{norm_estimate, symmetry_defect, HessianApprox, HessianKind};
pub use oracle::{GradientOracle, NoiseModel};
pub use registry::{
    default_lsq_data, lsq_simplex, rosenbrock_circle, separable_quadratic, sphere_linear,
    Registry, SeparableQuadratic,
};

use crate::vecops;

pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{name}`; available: {}", available.join(", "))]
    UnknownProblem { name: String, available: Vec<String> },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("{what} returned non-finite values at x = {x:?}")]
    NonFinite { what: &'static str, x: Vec<f64> },
    #[error("invalid bounds at index {index}: lower {lower} > upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("equality count m = {m} exceeds dimension n = {n}")]
    TooManyConstraints { m: usize, n: usize },
    #[error("problem `{0}` has no true gradient; this oracle mode needs one")]
    MissingTrueGradient(String),
    #[error("problem `{0}` has no objective value callback")]
    MissingObjective(String),
    #[error("problem `{0}` has no Hessian callback")]
    MissingHessian(String),
    #[error("problem `{0}` has no finite-sum structure for batch sampling")]
    NotFiniteSum(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid oracle parameter: {0}")]
    InvalidOracle(String),
}

/// A constrained instance: `min E[f(x, ζ)]` s.t. `c(x) = 0`, `lower <= x <= upper`.
#[derive(Clone)]
pub struct Problem {
    name: String,
    n: usize,
    m: usize,
    lower: DVector<f64>,
    upper: DVector<f64>,
    x0: DVector<f64>,
    constraints: VectorFn,
    jacobian: MatrixFn,
    gradient: Option<VectorFn>,
    objective: Option<ScalarFn>,
    hessian: Option<MatrixFn>,
    components: Option<Arc<dyn ComponentGradients>>,
    solution: Option<DVector<f64>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("lower", &self.lower.as_slice())
            .field("upper", &self.upper.as_slice())
            .field("has_gradient", &self.gradient.is_some())
            .field("has_objective", &self.objective.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .field("finite_sum", &self.components.is_some())
            .finish()
    }
}

/// One oracle evaluation at an iterate.
#[derive(Debug, Clone)]
pub struct GradientSample {
    /// Realized (possibly noisy) gradient.
    pub g: DVector<f64>,
    /// True gradient, when the problem provides one.
    pub true_gradient: Option<DVector<f64>>,
    pub c: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

pub struct ProblemBuilder {
    name: String,
    n: usize,
    m: usize,
    lower: Option<DVector<f64>>,
    upper: Option<DVector<f64>>,
    x0: Option<DVector<f64>>,
    constraints: Option<VectorFn>,
    jacobian: Option<MatrixFn>,
    gradient: Option<VectorFn>,
    objective: Option<ScalarFn>,
    hessian: Option<MatrixFn>,
    components: Option<Arc<dyn ComponentGradients>>,
    solution: Option<DVector<f64>>,
}

impl ProblemBuilder {
    pub fn bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn start(mut self, x0: DVector<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn constraints<C, J>(mut self, c: C, jac: J) -> Self
    where
        C: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.constraints = Some(Arc::new(c));
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn objective<F>(mut self, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        self.objective = Some(Arc::new(f));
        self
    }

    pub fn hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(h));
        self
    }

    /// Attach finite-sum structure. Also installs the full-batch gradient as the
    /// true gradient, so a full batch reproduces it bit for bit.
    pub fn finite_sum(mut self, components: Arc<dyn ComponentGradients>) -> Self {
        let all: Vec<usize> = (0..components.len()).collect();
        let comp = Arc::clone(&components);
        self.gradient = Some(Arc::new(move |x| comp.batch_gradient(x, &all)));
        self.components = Some(components);
        self
    }

    /// Known critical point, used by tests and reports.
    pub fn solution(mut self, x: DVector<f64>) -> Self {
        self.solution = Some(x);
        self
    }

    pub fn build(self) -> Result<Problem, ProblemError> {
        let n = self.n;
        let m = self.m;
        if m > n {
            return Err(ProblemError::TooManyConstraints { m, n });
        }
        let lower = self
            .lower
            .unwrap_or_else(|| DVector::from_element(n, f64::NEG_INFINITY));
        let upper = self
            .upper
            .unwrap_or_else(|| DVector::from_element(n, f64::INFINITY));
        for (what, v) in [("lower", &lower), ("upper", &upper)] {
            if v.len() != n {
                return Err(ProblemError::Dimension {
                    what,
                    expected: n.to_string(),
                    got: v.len().to_string(),
                });
            }
        }
        for i in 0..n {
            if lower[i] > upper[i] || lower[i].is_nan() || upper[i].is_nan() {
                return Err(ProblemError::InvalidBounds {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        let x0 = self.x0.unwrap_or_else(|| {
            // Closest point of the box to the origin.
            vecops::clamp(&DVector::zeros(n), &lower, &upper)
        });
        if x0.len() != n {
            return Err(ProblemError::Dimension {
                what: "x0",
                expected: n.to_string(),
                got: x0.len().to_string(),
            });
        }
        let (constraints, jacobian): (VectorFn, MatrixFn) = match (self.constraints, self.jacobian)
        {
            (Some(c), Some(j)) => (c, j),
            _ => {
                if m != 0 {
                    return Err(ProblemError::Dimension {
                        what: "constraints",
                        expected: format!("{m} constraint callbacks"),
                        got: "none".into(),
                    });
                }
                (
                    Arc::new(|_: &DVector<f64>| DVector::zeros(0)),
                    Arc::new(move |_: &DVector<f64>| DMatrix::zeros(0, n)),
                )
            }
        };
        Ok(Problem {
            name: self.name,
            n,
            m,
            lower,
            upper,
            x0,
            constraints,
            jacobian,
            gradient: self.gradient,
            objective: self.objective,
            hessian: self.hessian,
            components: self.components,
            solution: self.solution,
        })
    }
}

impl Problem {
    pub fn builder(name: impl Into<String>, n: usize, m: usize) -> ProblemBuilder {
        ProblemBuilder {
            name: name.into(),
            n,
            m,
            lower: None,
            upper: None,
            x0: None,
            constraints: None,
            jacobian: None,
            gradient: None,
            objective: None,
            hessian: None,
            components: None,
            solution: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eq_count(&self) -> usize {
        self.m
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn solution(&self) -> Option<&DVector<f64>> {
        self.solution.as_ref()
    }

    pub fn has_true_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_objective(&self) -> bool {
        self.objective.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn components(&self) -> Option<&Arc<dyn ComponentGradients>> {
        self.components.as_ref()
    }

    /// Replace the starting point.
    pub fn with_start(mut self, x0: DVector<f64>) -> Result<Self, ProblemError> {
        self.check_len("x0", &x0)?;
        self.x0 = x0;
        Ok(self)
    }

    /// Replace the bounds, keeping every callback.
    pub fn with_bounds(
        mut self,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        self.check_len("lower", &lower)?;
        self.check_len("upper", &upper)?;
        for i in 0..self.n {
            if lower[i] > upper[i] {
                return Err(ProblemError::InvalidBounds {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        self.lower = lower;
        self.upper = upper;
        self.solution = None;
        Ok(self)
    }

    fn check_len(&self, what: &'static str, v: &DVector<f64>) -> Result<(), ProblemError> {
        if v.len() != self.n {
            return Err(ProblemError::Dimension {
                what,
                expected: self.n.to_string(),
                got: v.len().to_string(),
            });
        }
        Ok(())
    }

    fn non_finite(what: &'static str, x: &DVector<f64>) -> ProblemError {
        ProblemError::NonFinite {
            what,
            x: x.iter().copied().collect(),
        }
    }

    pub fn constraint_value(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        self.check_len("x", x)?;
        let c = (self.constraints)(x);
        if c.len() != self.m {
            return Err(ProblemError::Dimension {
                what: "c(x)",
                expected: self.m.to_string(),
                got: c.len().to_string(),
            });
        }
        if !vecops::all_finite(&c) {
            return Err(Self::non_finite("c(x)", x));
        }
        Ok(c)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        self.check_len("x", x)?;
        let j = (self.jacobian)(x);
        if j.nrows() != self.m || j.ncols() != self.n {
            return Err(ProblemError::Dimension {
                what: "J(x)",
                expected: format!("{}x{}", self.m, self.n),
                got: format!("{}x{}", j.nrows(), j.ncols()),
            });
        }
        if !vecops::matrix_finite(&j) {
            return Err(Self::non_finite("J(x)", x));
        }
        Ok(j)
    }

    pub fn true_gradient(&self, x: &DVector<f64>) -> Result<Option<DVector<f64>>, ProblemError> {
        self.check_len("x", x)?;
        let Some(grad) = &self.gradient else {
            return Ok(None);
        };
        let g = grad(x);
        if g.len() != self.n {
            return Err(ProblemError::Dimension {
                what: "G(x)",
                expected: self.n.to_string(),
                got: g.len().to_string(),
            });
        }
        if !vecops::all_finite(&g) {
            return Err(Self::non_finite("G(x)", x));
        }
        Ok(Some(g))
    }

    /// Objective value. Only diagnostics call this; the solver never does.
    pub fn objective_value(&self, x: &DVector<f64>) -> Result<f64, ProblemError> {
        self.check_len("x", x)?;
        let f = self
            .objective
            .as_ref()
            .ok_or_else(|| ProblemError::MissingObjective(self.name.clone()))?;
        let v = f(x);
        if !v.is_finite() {
            return Err(Self::non_finite("f(x)", x));
        }
        Ok(v)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        self.check_len("x", x)?;
        let h = self
            .hessian
            .as_ref()
            .ok_or_else(|| ProblemError::MissingHessian(self.name.clone()))?;
        let b = h(x);
        if b.nrows() != self.n || b.ncols() != self.n {
            return Err(ProblemError::Dimension {
                what: "Hessian",
                expected: format!("{}x{}", self.n, self.n),
                got: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        if !vecops::matrix_finite(&b) {
            return Err(Self::non_finite("Hessian", x));
        }
        Ok(b)
    }

    /// Evaluate `c`, `J` and a gradient sample at `x`.
    pub fn evaluate(
        &self,
        oracle: &mut GradientOracle,
        x: &DVector<f64>,
    ) -> Result<GradientSample, ProblemError> {
        let c = self.constraint_value(x)?;
        let jacobian = self.jacobian(x)?;
        let (g, true_gradient) = oracle.sample(self, x)?;
        if !vecops::all_finite(&g) {
            return Err(Self::non_finite("g(x)", x));
        }
        Ok(GradientSample {
            g,
            true_gradient,
            c,
            jacobian,
        })
    }

    /// Central finite-difference Jacobian of `c`.
    pub fn fd_jacobian(&self, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>, ProblemError> {
        let mut out = DMatrix::zeros(self.m, self.n);
        for i in 0..self.n {
            let step = h * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let col = (self.constraint_value(&xp)? - self.constraint_value(&xm)?) / (2.0 * step);
            out.set_column(i, &col);
        }
        Ok(out)
    }

    /// Central finite-difference gradient of the objective value.
    pub fn fd_gradient(&self, x: &DVector<f64>, h: f64) -> Result<DVector<f64>, ProblemError> {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n {
            let step = h * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            out[i] = (self.objective_value(&xp)? - self.objective_value(&xm)?) / (2.0 * step);
        }
        Ok(out)
    }
}
