use nalgebra::{DMatrix, DVector};

use super::{cauchy_step, model_value};
use crate::projections::{TangentBoxSet, TOL_BOX, TOL_EQ};
use crate::vecops;

#[derive(Debug, Clone)]
pub struct TangentialStepResult {
    pub s_l: DVector<f64>,
    pub s_c: DVector<f64>,
    pub s_t: DVector<f64>,
    pub gamma_coeff: f64,
    pub model_cauchy: f64,
    pub model_step: f64,
    /// True when the refined step replaced the Cauchy step.
    pub refined: bool,
}

/// Cauchy step, optionally continued by truncated conjugate gradients.
///
/// `refine` is the feasible region `F ∩ S` of the step. The refined iterate is
/// kept only if it stays in that region, is at least as long as `s_C` and
/// satisfies `m(s_T) <= τ m(s_C)`; otherwise `s_T = s_C`.
pub fn tangential_step(
    g: &DVector<f64>,
    s_l: &DVector<f64>,
    b: &DMatrix<f64>,
    tau: f64,
    refine: Option<&TangentBoxSet<'_>>,
) -> TangentialStepResult {
    let (gamma_coeff, s_c) = cauchy_step(g, s_l, b);
    let model_cauchy = model_value(g, b, &s_c);
    let fallback = TangentialStepResult {
        s_l: s_l.clone(),
        s_c: s_c.clone(),
        s_t: s_c.clone(),
        gamma_coeff,
        model_cauchy,
        model_step: model_cauchy,
        refined: false,
    };
    let Some(region) = refine else {
        return fallback;
    };
    let Some(candidate) = truncated_cg(g, b, &s_c, region) else {
        return fallback;
    };
    let model_step = model_value(g, b, &candidate);
    let j = region.space().jacobian();
    let eq_ok = j.nrows() == 0 || (j * &candidate).amax() <= TOL_EQ * region.space().norm().max(1.0);
    let box_ok = vecops::box_violation(&candidate, region.lo(), region.hi()) <= TOL_BOX;
    if eq_ok
        && box_ok
        && candidate.norm() >= s_c.norm()
        && model_step <= tau * model_cauchy
        && model_step.is_finite()
    {
        TangentialStepResult {
            s_t: candidate,
            model_step,
            refined: true,
            ..fallback
        }
    } else {
        fallback
    }
}

/// Steihaug-type CG on the model restricted to the face of `s_C`.
///
/// Components of `s_C` on a bound stay fixed; the free ones move in the null
/// space of the matching Jacobian columns. Iterations stop at the first
/// boundary hit, on nonpositive curvature, or after as many iterations as the
/// reduced dimension.
fn truncated_cg(
    g: &DVector<f64>,
    b: &DMatrix<f64>,
    s_c: &DVector<f64>,
    region: &TangentBoxSet<'_>,
) -> Option<DVector<f64>> {
    let n = g.len();
    let (lo, hi) = (region.lo(), region.hi());
    let free: Vec<usize> = (0..n)
        .filter(|&i| {
            let margin = 1e-14 * s_c[i].abs().max(1.0);
            s_c[i] > lo[i] + margin && s_c[i] < hi[i] - margin
        })
        .collect();
    if free.is_empty() {
        return None;
    }
    let j = region.space().jacobian();
    let j_free = DMatrix::from_fn(j.nrows(), free.len(), |r, c| j[(r, free[c])]);
    let z_free = vecops::null_space_basis(&j_free, 1e-12);
    let dim = z_free.ncols();
    if dim == 0 {
        return None;
    }
    let mut z = DMatrix::zeros(n, dim);
    for (row, &i) in free.iter().enumerate() {
        z.row_mut(i).copy_from(&z_free.row(row));
    }
    let reduced_hessian = z.transpose() * b * &z;
    let mut s = s_c.clone();
    let mut residual = z.transpose() * (g + b * s_c);
    let initial = residual.norm();
    if initial == 0.0 {
        return None;
    }
    let mut p = -&residual;
    for _ in 0..dim {
        if residual.norm() <= 1e-12 * initial {
            break;
        }
        let direction = &z * &p;
        let to_boundary = step_to_boundary(&s, &direction, lo, hi, &free);
        let hp = &reduced_hessian * &p;
        let curvature = p.dot(&hp);
        if curvature <= 0.0 {
            if to_boundary.is_finite() {
                s += direction * to_boundary;
            }
            break;
        }
        let rr = residual.norm_squared();
        let t = rr / curvature;
        if t >= to_boundary {
            s += direction * to_boundary;
            break;
        }
        s += direction * t;
        residual += hp * t;
        p = -&residual + p * (residual.norm_squared() / rr);
    }
    Some(vecops::clamp(&s, lo, hi))
}

fn step_to_boundary(
    s: &DVector<f64>,
    direction: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    free: &[usize],
) -> f64 {
    free.iter().fold(f64::INFINITY, |t, &i| {
        let di = direction[i];
        let limit = if di > 0.0 {
            (hi[i] - s[i]) / di
        } else if di < 0.0 {
            (lo[i] - s[i]) / di
        } else {
            f64::INFINITY
        };
        t.min(limit.max(0.0))
    })
}
