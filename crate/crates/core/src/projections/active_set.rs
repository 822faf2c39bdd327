use nalgebra::{DMatrix, DVector};

use super::{ProjectionError, TangentBoxSet, TOL_EQ};
use crate::vecops;

pub(super) struct ExactOutcome {
    pub point: DVector<f64>,
    pub multiplier: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Free,
    Lower,
    Upper,
}

fn columns(j: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(j.nrows(), idx.len(), |r, c| j[(r, idx[c])])
}

fn entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |a, _| v[idx[a]])
}

/// Primal active-set method for `min ½‖y − p‖²` over `{J y = 0, lo <= y <= hi}`.
///
/// Starts at the feasible origin with an empty working set. A bound joins the
/// working set only when it blocks a step `s` with `J_F s = 0` and `s_i ≠ 0`,
/// so `J_F` keeps full row rank and the multipliers stay unique, even on
/// faces where the feasible set has no relative interior.
pub(super) fn project(p: &DVector<f64>, set: &TangentBoxSet<'_>) -> Result<ExactOutcome, ProjectionError> {
    let space = set.space();
    let j = space.jacobian();
    let (lo, hi) = (set.lo(), set.hi());
    let n = p.len();
    let scale = space.norm().max(1.0);
    let mut y = DVector::zeros(n);
    let mut slot = vec![Slot::Free; n];
    let cap = 50 * (n + j.nrows() + 1);
    let mut iterations = 0;
    let mut nu = DVector::zeros(j.nrows());

    loop {
        if iterations == cap {
            return Err(ProjectionError::NotConverged {
                residual: set.kkt_residual(p, &y, &nu),
                sigma_min: space.sigma_min(),
            });
        }
        iterations += 1;
        let free: Vec<usize> = (0..n).filter(|&i| slot[i] == Slot::Free).collect();
        let jf = columns(j, &free);
        let r = p - &y;
        let rf = entries(&r, &free);
        let basis = vecops::null_space_basis(&jf, 1e-12);
        let step = &basis * (basis.transpose() * &rf);

        if step.amax() > 1e-14 * r.amax() {
            let mut length = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                let (room, side) = if step[a] < 0.0 {
                    (lo[i] - y[i], Slot::Lower)
                } else if step[a] > 0.0 {
                    (hi[i] - y[i], Slot::Upper)
                } else {
                    continue;
                };
                let ratio = (room / step[a]).max(0.0);
                if ratio < length {
                    length = ratio;
                    blocking = Some((i, side));
                }
            }
            for (a, &i) in free.iter().enumerate() {
                y[i] += length * step[a];
            }
            if let Some((i, side)) = blocking {
                y[i] = if side == Slot::Lower { lo[i] } else { hi[i] };
                slot[i] = side;
            }
            continue;
        }

        // Stationary on the working set: r = Jᵀν + ζ with ζ_F = 0.
        nu = if jf.ncols() == 0 {
            DVector::zeros(j.nrows())
        } else {
            vecops::least_squares(&jf.transpose(), &rf, 1e-14)
        };
        let zeta = &r - j.transpose() * &nu;
        let tol = 1e-12 * (1.0 + r.amax());
        let mut release = None;
        let mut worst = tol;
        for i in 0..n {
            let wrong_sign = match slot[i] {
                Slot::Free => continue,
                _ if lo[i] == hi[i] => continue,
                Slot::Lower => zeta[i],
                Slot::Upper => -zeta[i],
            };
            if wrong_sign > worst {
                worst = wrong_sign;
                release = Some(i);
            }
        }
        match release {
            Some(i) => slot[i] = Slot::Free,
            None => break,
        }
    }

    // Re-solve the free block so J y = 0 holds to rounding.
    let free: Vec<usize> = (0..n).filter(|&i| slot[i] == Slot::Free).collect();
    if !free.is_empty() {
        let jf = columns(j, &free);
        let pf = entries(p, &free);
        let pinned = j * &y - &jf * entries(&y, &free);
        let polished = &pf - vecops::min_norm_solve(&jf, &(&jf * &pf + &pinned), 1e-14);
        let mut candidate = y.clone();
        for (a, &i) in free.iter().enumerate() {
            candidate[i] = polished[a];
        }
        let drift = (&candidate - &y).amax();
        if drift <= 1e-10 * (1.0 + y.amax()) {
            y = vecops::clamp(&candidate, lo, hi);
        }
    }
    let residual = (j * &y).amax() / scale;
    if residual > TOL_EQ {
        return Err(ProjectionError::NotConverged {
            residual,
            sigma_min: space.sigma_min(),
        });
    }
    Ok(ExactOutcome {
        point: y,
        multiplier: nu,
        iterations,
    })
}
