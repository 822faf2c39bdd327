use nalgebra::DVector;

use super::TangentBoxSet;
use crate::vecops;

pub(super) struct DykstraOutcome {
    pub point: DVector<f64>,
    pub multiplier: DVector<f64>,
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Dykstra's alternating projections between `null(J)` and the box.
///
/// Invariant: `p = x + p_inc + q` with `p_inc ∈ range(Jᵀ)` and `q` in the
/// normal cone of the box at `x`, so `ν = (J Jᵀ)⁻¹ J p_inc` is the running
/// multiplier estimate. The returned point is the null-space iterate.
pub(super) fn project(
    p: &DVector<f64>,
    set: &TangentBoxSet<'_>,
    tol: f64,
    max_sweeps: usize,
) -> DykstraOutcome {
    let space = set.space();
    let n = p.len();
    let mut x = p.clone();
    let mut p_inc = DVector::zeros(n);
    let mut q = DVector::zeros(n);
    let mut best: Option<DykstraOutcome> = None;
    for sweep in 1..=max_sweeps.max(1) {
        let shifted = &x + &p_inc;
        let y = space.project_null(&shifted);
        p_inc = shifted - &y;
        let pre_box = &y + &q;
        x = vecops::clamp(&pre_box, set.lo(), set.hi());
        q = pre_box - &x;

        let nu = space.range_coefficients(&p_inc);
        let residual = set.kkt_residual(p, &y, &nu);
        let improved = best.as_ref().is_none_or(|b| residual < b.residual);
        if improved {
            best = Some(DykstraOutcome {
                point: y,
                multiplier: nu,
                residual,
                sweeps: sweep,
                converged: residual <= tol,
            });
        }
        if residual <= tol {
            break;
        }
    }
    let mut out = best.expect("at least one sweep");
    out.sweeps = out.sweeps.max(1);
    out
}
