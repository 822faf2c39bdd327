use nalgebra::{DMatrix, DVector};

use super::ProjectionError;
use crate::vecops;

/// Exhaustive active-set projection of `−g` onto `{J y = 0, lo <= y <= hi}`.
///
/// Enumerates every assignment of each component to free, at-lower or
/// at-upper, solves the equality-constrained least-squares problem on the free
/// components with a pseudo-inverse, and keeps the closest feasible point.
/// Exponential in `n`, so limited to `n <= 6`, `m <= 2`.
pub fn brute_force_projection(
    g: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<DVector<f64>, ProjectionError> {
    let n = g.len();
    let m = jacobian.nrows();
    if n > 6 || m > 2 {
        return Err(ProjectionError::TooLarge { n, m });
    }
    if jacobian.ncols() != n || lo.len() != n || hi.len() != n {
        return Err(ProjectionError::Dimension("oracle inputs".into()));
    }
    let p = -g;
    let jscale = jacobian.norm().max(1.0);
    let pscale = 1.0 + p.amax();
    let feas_tol = 1e-13 * pscale;

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut state = vec![0u8; n];
    loop {
        let valid = state.iter().enumerate().all(|(i, &s)| match s {
            1 => lo[i].is_finite(),
            2 => hi[i].is_finite(),
            _ => true,
        });
        if valid {
            if let Some(y) = solve_pattern(&p, jacobian, lo, hi, &state, jscale) {
                if vecops::box_violation(&y, lo, hi) <= feas_tol {
                    let dist = (&y - &p).norm_squared();
                    if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                        best = Some((dist, y));
                    }
                }
            }
        }
        // Odometer over {free, lower, upper}^n.
        let mut i = 0;
        while i < n {
            state[i] += 1;
            if state[i] < 3 {
                break;
            }
            state[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    best.map(|(_, y)| y).ok_or(ProjectionError::NotConverged {
        residual: f64::INFINITY,
        sigma_min: 0.0,
    })
}

fn solve_pattern(
    p: &DVector<f64>,
    j: &DMatrix<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    state: &[u8],
    jscale: f64,
) -> Option<DVector<f64>> {
    let n = p.len();
    let m = j.nrows();
    let mut y = DVector::zeros(n);
    let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
    for i in 0..n {
        match state[i] {
            1 => y[i] = lo[i],
            2 => y[i] = hi[i],
            _ => {}
        }
    }
    // Free part must satisfy J_F y_F = r with r = −J_B y_B.
    let r = -(j * &y);
    if m == 0 {
        for &i in &free {
            y[i] = p[i];
        }
        return Some(y);
    }
    // J_F y_F = r is solvable iff r has no component along the left singular
    // vectors of the zero singular values; measured relative to ‖y_B‖ so tiny
    // boxes get a proportionally tight test.
    let eq_tol = 1e-9 * jscale * y.amax();
    if free.is_empty() {
        return (r.amax() <= eq_tol).then_some(y);
    }
    let jf = DMatrix::from_fn(m, free.len(), |a, b| j[(a, free[b])]);
    let pf = DVector::from_fn(free.len(), |a, _| p[free[a]]);
    let svd = jf.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested");
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    for k in 0..m {
        let sigma = if k < svd.singular_values.len() { svd.singular_values[k] } else { 0.0 };
        if sigma <= cutoff && k < u.ncols() && u.column(k).dot(&r).abs() > eq_tol {
            return None;
        }
    }
    if u.ncols() < m {
        // More rows than free columns: the complement of range(U) is also null.
        let leftover = &r - u * (u.transpose() * &r);
        if leftover.amax() > eq_tol {
            return None;
        }
    }
    // Minimum-norm correction from J_F itself: going through J_F J_Fᵀ squares
    // the condition number and can push the exact solution off the box.
    let yf = &pf - vecops::min_norm_solve(&jf, &(&jf * &pf - &r), 1e-12);
    for (a, &i) in free.iter().enumerate() {
        y[i] = yf[a];
    }
    Some(y)
}
