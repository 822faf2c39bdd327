//! Euclidean projections onto `{y : J y = 0, lo <= y <= hi}` and
//! least-squares multipliers.
//!
//! The set always contains the origin (the iterate lies in the box), so it is
//! a nonempty polyhedron and the projection is unique. Three routes are tried
//! in order: the closed-form null-space projection when it already lies in the
//! box, Dykstra's alternating projections (to a tolerance relative to the
//! size of the answer), and an exact primal active-set method started from
//! the origin.

mod active_set;
mod dykstra;
mod oracle;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;
use thiserror::Error;

pub use oracle::brute_force_projection;

use crate::vecops;

/// Feasibility tolerance on `‖J y‖`, relative to `max(1, ‖J‖)`.
pub const TOL_EQ: f64 = 1e-10;
/// Feasibility tolerance on the box.
pub const TOL_BOX: f64 = 1e-10;
/// Tolerance on the variational inequality characterising the projection.
pub const TOL_VI: f64 = 1e-8;
/// Relative rank threshold on `σ_min(J) / ‖J‖`.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("Jacobian is rank deficient: sigma_min = {sigma_min:e}, ‖J‖ = {norm:e}")]
    RankDeficient { sigma_min: f64, norm: f64 },
    #[error("projection did not converge: residual {residual:e} (sigma_min(J) = {sigma_min:e})")]
    NotConverged { residual: f64, sigma_min: f64 },
    #[error("the origin is not inside the box at component {index}")]
    OriginOutsideBox { index: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("brute-force oracle refuses n = {n}, m = {m} (limits n <= 6, m <= 2)")]
    TooLarge { n: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    AnalyticNullspace,
    Dykstra,
    ActiveSetQp,
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub point: DVector<f64>,
    /// Multiplier of `J y = 0`: `point = clamp(p − Jᵀν)` at the solution.
    pub multiplier: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations_used: usize,
    pub method: ProjectionMethod,
}

/// Factorization of one Jacobian, shared by every projection and multiplier
/// computed at the same iterate.
#[derive(Debug, Clone)]
pub struct TangentSpace {
    jacobian: DMatrix<f64>,
    gram: Option<Cholesky<f64, Dyn>>,
    norm: f64,
    sigma_min: f64,
}

impl TangentSpace {
    pub fn new(jacobian: DMatrix<f64>) -> Result<Self, ProjectionError> {
        let m = jacobian.nrows();
        if m == 0 {
            return Ok(Self {
                jacobian,
                gram: None,
                norm: 0.0,
                sigma_min: f64::INFINITY,
            });
        }
        if m > jacobian.ncols() {
            return Err(ProjectionError::Dimension(format!(
                "J is {}x{}, need m <= n",
                m,
                jacobian.ncols()
            )));
        }
        let sv = jacobian.singular_values();
        let norm = sv.max();
        let sigma_min = sv.min();
        if !(sigma_min > RANK_TOL * norm) {
            return Err(ProjectionError::RankDeficient { sigma_min, norm });
        }
        let gram = Cholesky::new(&jacobian * jacobian.transpose())
            .ok_or(ProjectionError::RankDeficient { sigma_min, norm })?;
        Ok(Self {
            jacobian,
            gram: Some(gram),
            norm,
            sigma_min,
        })
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn dim(&self) -> usize {
        self.jacobian.ncols()
    }

    pub fn eq_count(&self) -> usize {
        self.jacobian.nrows()
    }

    /// Spectral norm `‖J‖` (zero when `m = 0`).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// `(J Jᵀ)⁻¹ J v`.
    pub fn range_coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.gram {
            Some(chol) => chol.solve(&(&self.jacobian * v)),
            None => DVector::zeros(0),
        }
    }

    /// Orthogonal projection onto `null(J)`.
    pub fn project_null(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.gram.is_none() {
            return v.clone();
        }
        v - self.jacobian.transpose() * self.range_coefficients(v)
    }

    /// Solution of `(J Jᵀ) λ = −J g`.
    pub fn least_squares_multiplier(&self, g: &DVector<f64>) -> DVector<f64> {
        -self.range_coefficients(g)
    }
}

/// `{y : J y = 0, lo <= y <= hi}` with `lo = ℓ − x`, `hi = u − x`.
#[derive(Debug, Clone)]
pub struct TangentBoxSet<'a> {
    space: &'a TangentSpace,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl<'a> TangentBoxSet<'a> {
    pub fn new(
        space: &'a TangentSpace,
        lo: DVector<f64>,
        hi: DVector<f64>,
    ) -> Result<Self, ProjectionError> {
        let n = space.dim();
        if lo.len() != n || hi.len() != n {
            return Err(ProjectionError::Dimension(format!(
                "box has {}/{} entries, J has {} columns",
                lo.len(),
                hi.len(),
                n
            )));
        }
        let mut lo = lo;
        let mut hi = hi;
        for i in 0..n {
            if lo[i] > TOL_BOX || hi[i] < -TOL_BOX || lo[i].is_nan() || hi[i].is_nan() {
                return Err(ProjectionError::OriginOutsideBox { index: i });
            }
            lo[i] = lo[i].min(0.0);
            hi[i] = hi[i].max(0.0);
        }
        Ok(Self { space, lo, hi })
    }

    /// The tangent set at `x` for the bounds `lower <= x <= upper`.
    pub fn at(
        space: &'a TangentSpace,
        x: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
    ) -> Result<Self, ProjectionError> {
        Self::new(space, lower - x, upper - x)
    }

    /// Intersection with the box `trust_lo <= y <= trust_hi`.
    pub fn intersect(
        &self,
        trust_lo: &DVector<f64>,
        trust_hi: &DVector<f64>,
    ) -> Result<Self, ProjectionError> {
        if trust_lo.len() != self.lo.len() || trust_hi.len() != self.hi.len() {
            return Err(ProjectionError::Dimension("trust box length".into()));
        }
        Self::new(self.space, self.lo.sup(trust_lo), self.hi.inf(trust_hi))
    }

    pub fn space(&self) -> &TangentSpace {
        self.space
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    /// Largest `|y_i|` over the box (infinite when any side is unbounded).
    pub fn extent(&self) -> f64 {
        self.lo.iter().chain(self.hi.iter()).fold(0.0, |acc, b| acc.max(b.abs()))
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        let eq = (self.space.jacobian() * y).amax();
        eq <= TOL_EQ.max(tol) * self.space.norm().max(1.0)
            && vecops::box_violation(y, &self.lo, &self.hi) <= TOL_BOX.max(tol)
    }

    /// Optimality residual of `y` as the projection of `p` with multiplier `ν`.
    pub(crate) fn kkt_residual(&self, p: &DVector<f64>, y: &DVector<f64>, nu: &DVector<f64>) -> f64 {
        let j = self.space.jacobian();
        let eq = if j.nrows() == 0 {
            0.0
        } else {
            (j * y).amax() / self.space.norm().max(1.0)
        };
        let shifted = if j.nrows() == 0 {
            p.clone()
        } else {
            p - j.transpose() * nu
        };
        let stat = (y - vecops::clamp(&shifted, &self.lo, &self.hi)).amax();
        eq.max(vecops::box_violation(y, &self.lo, &self.hi)).max(stat)
    }
}

/// `P_F[−g]`: projection of the negative gradient onto the tangent set.
pub fn project_tangent_box(
    g: &DVector<f64>,
    set: &TangentBoxSet<'_>,
    tol: f64,
) -> Result<ProjectionResult, ProjectionError> {
    if g.len() != set.space.dim() {
        return Err(ProjectionError::Dimension(format!(
            "g has {} entries, expected {}",
            g.len(),
            set.space.dim()
        )));
    }
    let p = -g;
    let space = set.space;

    if space.eq_count() == 0 {
        let point = vecops::clamp(&p, &set.lo, &set.hi);
        return Ok(ProjectionResult {
            point,
            multiplier: DVector::zeros(0),
            kkt_residual: 0.0,
            iterations_used: 0,
            method: ProjectionMethod::AnalyticNullspace,
        });
    }

    let nu = space.range_coefficients(&p);
    let point = &p - space.jacobian().transpose() * &nu;
    if vecops::box_violation(&point, &set.lo, &set.hi) == 0.0 {
        let kkt_residual = set.kkt_residual(&p, &point, &nu);
        return Ok(ProjectionResult {
            point,
            multiplier: nu,
            kkt_residual,
            iterations_used: 0,
            method: ProjectionMethod::AnalyticNullspace,
        });
    }

    let n = space.dim();
    let m = space.eq_count();
    let cap = 10 * n * (m + 1);
    // The projection is bounded by both ‖p‖ and the box, so an absolute
    // tolerance would accept O(1) relative errors on small inputs.
    let scale = p.norm().min(set.extent()).clamp(f64::MIN_POSITIVE, 1.0);
    let attempt = dykstra::project(&p, set, tol * scale, cap);
    if attempt.converged {
        return Ok(ProjectionResult {
            kkt_residual: set.kkt_residual(&p, &attempt.point, &attempt.multiplier),
            point: attempt.point,
            multiplier: attempt.multiplier,
            iterations_used: attempt.sweeps,
            method: ProjectionMethod::Dykstra,
        });
    }
    log::trace!(
        "dykstra stalled at residual {:e} after {} sweeps, switching to active-set",
        attempt.residual,
        attempt.sweeps
    );
    let exact = active_set::project(&p, set)?;
    Ok(ProjectionResult {
        iterations_used: attempt.sweeps + exact.iterations,
        kkt_residual: set.kkt_residual(&p, &exact.point, &exact.multiplier),
        point: exact.point,
        multiplier: exact.multiplier,
        method: ProjectionMethod::ActiveSetQp,
    })
}

/// `P_{F ∩ S}[−g]` with `S = {trust_lo <= y <= trust_hi}`.
pub fn project_tangent_two_boxes(
    g: &DVector<f64>,
    set: &TangentBoxSet<'_>,
    trust_lo: &DVector<f64>,
    trust_hi: &DVector<f64>,
    tol: f64,
) -> Result<ProjectionResult, ProjectionError> {
    let tight = set.intersect(trust_lo, trust_hi)?;
    project_tangent_box(g, &tight, tol)
}

/// Least-squares multiplier `λ̂` solving `(J Jᵀ) λ̂ = −J g`.
pub fn least_squares_multiplier(
    jacobian: &DMatrix<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>, ProjectionError> {
    if jacobian.ncols() != g.len() {
        return Err(ProjectionError::Dimension(format!(
            "J has {} columns, g has {} entries",
            jacobian.ncols(),
            g.len()
        )));
    }
    Ok(TangentSpace::new(jacobian.clone())?.least_squares_multiplier(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn zero_gradient_projects_to_origin() {
        let space = TangentSpace::new(row(&[1.0, 2.0, -1.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-1.0, 0.0, -2.0]), vec(&[1.0, 1.0, 0.5])).unwrap();
        let r = project_tangent_box(&DVector::zeros(3), &set, 1e-12).unwrap();
        assert_eq!(r.point, DVector::zeros(3));
    }

    #[test]
    fn unconstrained_free_space_returns_minus_g() {
        let space = TangentSpace::new(DMatrix::zeros(0, 2)).unwrap();
        let inf = DVector::from_element(2, f64::INFINITY);
        let set = TangentBoxSet::new(&space, -&inf, inf).unwrap();
        let r = project_tangent_box(&vec(&[1.0, 2.0]), &set, 1e-12).unwrap();
        assert_eq!(r.point, vec(&[-1.0, -2.0]));
    }

    #[test]
    fn analytic_nullspace_projection() {
        // P = I − Jᵀ(JJᵀ)⁻¹J applied to (−1, 0) gives (−1/2, 1/2).
        let space = TangentSpace::new(row(&[1.0, 1.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-10.0, -10.0]), vec(&[10.0, 10.0])).unwrap();
        let r = project_tangent_box(&vec(&[1.0, 0.0]), &set, 1e-12).unwrap();
        assert_eq!(r.method, ProjectionMethod::AnalyticNullspace);
        assert_relative_eq!(r.point, vec(&[-0.5, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn tight_box_lands_on_a_face() {
        // J = [1 1], −g = (10, −3): the null-space projection (6.5, −6.5)
        // leaves [−1, 1]², the answer is the face point (1, −1).
        let space = TangentSpace::new(row(&[1.0, 1.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-1.0, -1.0]), vec(&[1.0, 1.0])).unwrap();
        let r = project_tangent_box(&vec(&[-10.0, 3.0]), &set, 1e-12).unwrap();
        assert_relative_eq!(r.point, vec(&[1.0, -1.0]), epsilon = 1e-12);
        assert!(r.kkt_residual <= 1e-10);
    }

    #[test]
    fn symmetric_gradient_on_tight_box_projects_to_origin() {
        // g = −(10, 10): −g = (10, 10) is orthogonal to null([1 1]).
        let space = TangentSpace::new(row(&[1.0, 1.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-1.0, -1.0]), vec(&[1.0, 1.0])).unwrap();
        let r = project_tangent_box(&vec(&[-10.0, -10.0]), &set, 1e-12).unwrap();
        assert!(r.point.norm() < 1e-14);
        assert!(set.contains(&r.point, 0.0));
    }

    #[test]
    fn trust_box_clamps_free_projection() {
        let space = TangentSpace::new(DMatrix::zeros(0, 2)).unwrap();
        let inf = DVector::from_element(2, f64::INFINITY);
        let set = TangentBoxSet::new(&space, -&inf, inf).unwrap();
        let r = project_tangent_two_boxes(
            &vec(&[-3.0, 0.0]),
            &set,
            &vec(&[-1.0, -1.0]),
            &vec(&[1.0, 1.0]),
            1e-12,
        )
        .unwrap();
        assert_eq!(r.point, vec(&[1.0, 0.0]));
    }

    #[test]
    fn redundant_trust_box_changes_nothing() {
        let space = TangentSpace::new(row(&[1.0, 2.0, -1.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-1.0, 0.0, -2.0]), vec(&[1.0, 1.0, 0.5])).unwrap();
        let g = vec(&[0.3, -2.0, 1.1]);
        let a = project_tangent_box(&g, &set, 1e-12).unwrap();
        let big = DVector::from_element(3, 100.0);
        let b = project_tangent_two_boxes(&g, &set, &-&big, &big, 1e-12).unwrap();
        assert_eq!(a.point, b.point);
    }

    #[test]
    fn multiplier_examples() {
        let g = vec(&[0.7, -1.3, 2.0]);
        let lambda = least_squares_multiplier(&DMatrix::identity(3, 3), &g).unwrap();
        assert_relative_eq!(lambda, -&g, epsilon = 1e-15);

        let lambda = least_squares_multiplier(&row(&[2.0, 0.0]), &vec(&[4.0, 1.0])).unwrap();
        assert_relative_eq!(lambda[0], -2.0, epsilon = 1e-15);

        let lambda = least_squares_multiplier(&row(&[1.0, 1.0]), &vec(&[1.0, -1.0])).unwrap();
        assert_eq!(lambda[0], 0.0);
    }

    #[test]
    fn multiplier_residual_lies_in_null_space() {
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0]);
        let g = vec(&[0.2, 1.5, -0.4]);
        let lambda = least_squares_multiplier(&j, &g).unwrap();
        let r = &j * (&g + j.transpose() * lambda);
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn rank_deficient_jacobian_is_reported() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            least_squares_multiplier(&j, &vec(&[1.0, 0.0])),
            Err(ProjectionError::RankDeficient { .. })
        ));
        assert!(matches!(
            TangentSpace::new(row(&[0.0, 0.0])),
            Err(ProjectionError::RankDeficient { .. })
        ));
    }

    #[test]
    fn origin_outside_box_is_rejected() {
        let space = TangentSpace::new(row(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            TangentBoxSet::new(&space, vec(&[0.5, -1.0]), vec(&[1.0, 1.0])),
            Err(ProjectionError::OriginOutsideBox { index: 0 })
        ));
    }

    #[test]
    fn full_rank_square_jacobian_leaves_only_origin() {
        let space = TangentSpace::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0])).unwrap();
        let set = TangentBoxSet::new(&space, vec(&[-1.0, -1.0]), vec(&[1.0, 1.0])).unwrap();
        let r = project_tangent_box(&vec(&[3.0, -7.0]), &set, 1e-12).unwrap();
        assert!(r.point.amax() < 1e-14);
    }
}
