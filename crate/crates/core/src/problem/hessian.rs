use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Problem, ProblemError};
use crate::vecops;

const BB_MIN: f64 = 1e-8;
const BB_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HessianKind {
    Zero,
    /// `∇²f(x_k)` supplied by the problem.
    Exact,
    /// Scaled identity `(yᵀy / sᵀy) I`, safeguarded.
    BarzilaiBorwein,
    /// Dense BFGS matrix rebuilt from the last `memory` secant pairs.
    LimitedMemorySecant { memory: usize },
}

impl HessianKind {
    pub fn label(&self) -> &'static str {
        match self {
            HessianKind::Zero => "zero",
            HessianKind::Exact => "exact",
            HessianKind::BarzilaiBorwein => "barzilai_borwein",
            HessianKind::LimitedMemorySecant { .. } => "limited_memory_secant",
        }
    }
}

/// Symmetric model curvature `B_k` used by the tangential step.
#[derive(Debug, Clone)]
pub struct HessianApprox {
    kind: HessianKind,
    previous: Option<(DVector<f64>, DVector<f64>)>,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    bb_scale: Option<f64>,
}

impl HessianApprox {
    pub fn new(kind: HessianKind) -> Self {
        Self {
            kind,
            previous: None,
            pairs: VecDeque::new(),
            bb_scale: None,
        }
    }

    pub fn kind(&self) -> HessianKind {
        self.kind
    }

    /// Record the gradient sample taken at `x`; consecutive observations form
    /// the secant pair `(s, y) = (x⁺ − x, g⁺ − g)`.
    pub fn observe(&mut self, x: &DVector<f64>, g: &DVector<f64>) {
        if matches!(self.kind, HessianKind::Zero | HessianKind::Exact) {
            return;
        }
        if let Some((px, pg)) = self.previous.take() {
            let s = x - px;
            let y = g - pg;
            self.add_pair(s, y);
        }
        self.previous = Some((x.clone(), g.clone()));
    }

    fn add_pair(&mut self, s: DVector<f64>, y: DVector<f64>) {
        let sy = s.dot(&y);
        let yy = y.norm_squared();
        if !(sy > 1e-12 * s.norm() * y.norm()) || yy == 0.0 {
            return;
        }
        match self.kind {
            HessianKind::BarzilaiBorwein => {
                self.bb_scale = Some((yy / sy).clamp(BB_MIN, BB_MAX));
            }
            HessianKind::LimitedMemorySecant { memory } => {
                self.pairs.push_back((s, y));
                while self.pairs.len() > memory.max(1) {
                    self.pairs.pop_front();
                }
            }
            _ => {}
        }
    }

    /// Current matrix `B_k` at `x`.
    pub fn matrix(&self, problem: &Problem, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        let n = problem.dim();
        match self.kind {
            HessianKind::Zero => Ok(DMatrix::zeros(n, n)),
            HessianKind::Exact => {
                let h = problem.hessian(x)?;
                Ok((&h + h.transpose()) * 0.5)
            }
            HessianKind::BarzilaiBorwein => Ok(match self.bb_scale {
                Some(scale) => DMatrix::identity(n, n) * scale,
                None => DMatrix::zeros(n, n),
            }),
            HessianKind::LimitedMemorySecant { .. } => {
                let Some((s_last, y_last)) = self.pairs.back() else {
                    return Ok(DMatrix::zeros(n, n));
                };
                let delta = (y_last.norm_squared() / s_last.dot(y_last)).clamp(BB_MIN, BB_MAX);
                let mut b = DMatrix::identity(n, n) * delta;
                for (s, y) in &self.pairs {
                    let bs = &b * s;
                    let sbs = s.dot(&bs);
                    let ys = y.dot(s);
                    if sbs <= 0.0 || ys <= 0.0 {
                        continue;
                    }
                    b -= (&bs * bs.transpose()) / sbs;
                    b += (y * y.transpose()) / ys;
                    b = (&b + b.transpose()) * 0.5;
                }
                Ok(b)
            }
        }
    }
}

/// `|yᵀBz − zᵀBy| / (‖y‖‖z‖)`, zero for a symmetric operator.
pub fn symmetry_defect(b: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let scale = y.norm() * z.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (y.dot(&(b * z)) - z.dot(&(b * y))).abs() / scale
}

/// Spectral norm estimate of `B`.
pub fn norm_estimate(b: &DMatrix<f64>) -> f64 {
    vecops::operator_norm(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Registry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quad() -> Problem {
        Registry::default().get("separable-quadratic").unwrap()
    }

    fn feed(h: &mut HessianApprox, p: &Problem, points: &[Vec<f64>]) {
        for pt in points {
            let x = DVector::from_vec(pt.clone());
            let g = p.true_gradient(&x).unwrap().unwrap();
            h.observe(&x, &g);
        }
    }

    #[test]
    fn every_kind_is_symmetric_with_finite_norm() {
        let p = quad();
        let pts = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.1, -0.2, 0.3, 0.1],
            vec![0.2, 0.1, -0.1, 0.4],
            vec![-0.3, 0.2, 0.5, 0.2],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [
            HessianKind::Zero,
            HessianKind::Exact,
            HessianKind::BarzilaiBorwein,
            HessianKind::LimitedMemorySecant { memory: 2 },
        ] {
            let mut h = HessianApprox::new(kind);
            feed(&mut h, &p, &pts);
            let b = h.matrix(&p, &DVector::from_vec(pts[3].clone())).unwrap();
            for _ in 0..20 {
                let y = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
                let z = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
                assert!(symmetry_defect(&b, &y, &z) <= 1e-12, "{kind:?}");
            }
            assert!(norm_estimate(&b).is_finite());
        }
    }

    #[test]
    fn bb_recovers_curvature_of_isotropic_quadratic() {
        // For a gradient 3x the secant ratio is exactly 3.
        let mut h = HessianApprox::new(HessianKind::BarzilaiBorwein);
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let x1 = DVector::from_vec(vec![0.5, 1.0]);
        h.observe(&x0, &(&x0 * 3.0));
        h.observe(&x1, &(&x1 * 3.0));
        let p = Problem::builder("iso", 2, 0).build().unwrap();
        let b = h.matrix(&p, &x1).unwrap();
        assert!((b[(0, 0)] - 3.0).abs() < 1e-12 && b[(0, 1)] == 0.0);
    }

    #[test]
    fn secant_matrix_satisfies_latest_secant_equation() {
        let p = quad();
        let mut h = HessianApprox::new(HessianKind::LimitedMemorySecant { memory: 3 });
        feed(
            &mut h,
            &p,
            &[
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.1, -0.2, 0.3, 0.1],
                vec![0.2, 0.1, -0.1, 0.4],
            ],
        );
        let b = h.matrix(&p, &DVector::zeros(4)).unwrap();
        let s = DVector::from_vec(vec![0.1, 0.3, -0.4, 0.3]);
        let y = p
            .true_gradient(&DVector::from_vec(vec![0.2, 0.1, -0.1, 0.4]))
            .unwrap()
            .unwrap()
            - p.true_gradient(&DVector::from_vec(vec![0.1, -0.2, 0.3, 0.1]))
                .unwrap()
                .unwrap();
        assert!((&b * &s - &y).norm() < 1e-10);
    }

    #[test]
    fn exact_kind_needs_a_hessian_callback() {
        let p = Problem::builder("nohess", 2, 0).build().unwrap();
        let h = HessianApprox::new(HessianKind::Exact);
        assert!(matches!(
            h.matrix(&p, &DVector::zeros(2)),
            Err(ProblemError::MissingHessian(_))
        ));
    }
}
