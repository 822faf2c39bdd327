//! Small dense helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};

/// Componentwise clamp into `[lo, hi]`. Infinite bounds leave the entry untouched.
pub fn clamp(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(&x, (&l, &h))| x.max(l).min(h)),
    )
}

/// Largest amount by which `v` leaves the box `[lo, hi]` (zero when inside).
pub fn box_violation(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    v.iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(&x, (&l, &h))| (l - x).max(x - h).max(0.0))
        .fold(0.0, f64::max)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn matrix_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Spectral norm of a symmetric matrix estimated by power iteration on `B`.
///
/// The Rayleigh quotient of `B^2` is monotone towards the largest squared
/// eigenvalue, so the returned value never exceeds the true norm by more than
/// rounding.
pub fn operator_norm(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    if n == 0 || b.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    // Deterministic start with components in every direction.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..1000 {
        let w = b * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return estimate;
        }
        let next = norm;
        v = w / norm;
        if (next - estimate).abs() <= 1e-15 * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    // A final Rayleigh refinement: |v^T B v| can be slightly sharper than ‖Bv‖
    // for oscillating iterates, take the larger of the two.
    let rq = v.dot(&(b * &v)).abs();
    estimate.max(rq)
}

/// Moore-Penrose pseudo-inverse of a small symmetric positive semidefinite matrix.
pub fn pinv_psd(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cutoff = rel_tol * top.max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let q = eig.eigenvectors.column(k);
            out += (q * q.transpose()) / lambda;
        }
    }
    out
}

/// Moore-Penrose pseudo-inverse by SVD; singular values below
/// `rel_tol · σ_max` are treated as zero.
pub fn pinv(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    svd.pseudo_inverse(rel_tol * top.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()))
}

/// Thin QR of `a` (rows >= columns) when `a` has full column rank.
fn full_rank_qr(a: &DMatrix<f64>, rel_tol: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if a.ncols() == 0 || a.nrows() < a.ncols() {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let top = r.diagonal().amax();
    if !(r.diagonal().amin() > rel_tol * top) {
        return None;
    }
    Some((qr.q(), r))
}

/// Minimum-norm solution of `a z = b`. Householder QR of `aᵀ` when `a` has
/// full row rank, which stays accurate to rounding where an SVD
/// pseudo-inverse can lose several digits; pseudo-inverse otherwise.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if let Some((q, r)) = full_rank_qr(&a.transpose(), rel_tol) {
        if let Some(w) = r.tr_solve_upper_triangular(b) {
            return q * w;
        }
    }
    pinv(a, rel_tol) * b
}

/// Least-squares solution of `a x ≈ b`, by QR when `a` has full column rank.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if let Some((q, r)) = full_rank_qr(a, rel_tol) {
        if let Some(x) = r.solve_upper_triangular(&(q.transpose() * b)) {
            return x;
        }
    }
    pinv(a, rel_tol) * b
}

/// Orthonormal basis of the null space of `a` (columns), computed by SVD.
pub fn null_space_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Work with A^T A (n x n) so the full right singular basis is available.
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cutoff = rel_tol * top.max(f64::MIN_POSITIVE);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= cutoff)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clamp_with_infinite_bounds_is_identity() {
        let v = DVector::from_vec(vec![-5.0, 3.0]);
        let lo = DVector::from_element(2, f64::NEG_INFINITY);
        let hi = DVector::from_element(2, f64::INFINITY);
        assert_eq!(clamp(&v, &lo, &hi), v);
        assert_eq!(box_violation(&v, &lo, &hi), 0.0);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, -7.0, 1.0]));
        assert_relative_eq!(operator_norm(&b), 7.0, max_relative = 1e-10);
        assert_eq!(operator_norm(&DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn null_space_of_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let z = null_space_basis(&a, 1e-12);
        assert_eq!(z.ncols(), 2);
        assert!((&a * &z).norm() < 1e-12);
        assert!((z.transpose() * &z - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
