use serde::Serialize;

use crate::problem::NoiseModel;
use crate::solver::{Branch, Trace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    pub mode: String,
    pub iterations: usize,
    pub tangential_iterations: usize,
    /// Mean of `|(G − g)ᵀ s_T|` over tangential iterations.
    pub mean_error_along_step: f64,
    /// Mean of `‖s_T‖²` over tangential iterations.
    pub mean_step_sq: f64,
    /// Ratio of the two means above, the directional error constant.
    pub kappa_dir: f64,
    /// `mean |Ω_T − ‖d‖| / mean ‖d‖`.
    pub kappa_omega: f64,
    /// `mean ‖G − g‖ / mean ‖d‖`.
    pub gradient_error_ratio: f64,
    /// Configured directional constant for the step-proportional mode.
    pub configured_kappa: Option<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Empirical gradient-error statistics over the iterations that carry a true
/// gradient.
pub fn noise_condition_monitor(trace: &Trace, mode: &NoiseModel) -> NoiseReport {
    let mut iterations = 0usize;
    let mut tangential = 0usize;
    let (mut along, mut step_sq) = (0.0, 0.0);
    let (mut omega_gap, mut d_sum, mut err_sum) = (0.0, 0.0, 0.0);
    for r in &trace.records {
        let Some(truth) = &r.true_gradient else { continue };
        iterations += 1;
        let error = truth - &r.g;
        err_sum += error.norm();
        d_sum += r.d.norm();
        if let Some(omega) = r.omega_t_true {
            omega_gap += (omega - r.d.norm()).abs();
        }
        if r.branch == Branch::Tangential {
            if let Some(t) = &r.tangential {
                tangential += 1;
                along += error.dot(&t.s_t).abs();
                step_sq += t.s_t.norm_squared();
            }
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    let mean_error_along_step = mean(along, tangential);
    let mean_step_sq = mean(step_sq, tangential);
    NoiseReport {
        mode: mode.label().to_string(),
        iterations,
        tangential_iterations: tangential,
        mean_error_along_step,
        mean_step_sq,
        kappa_dir: ratio(mean_error_along_step, mean_step_sq),
        kappa_omega: ratio(mean(omega_gap, iterations), mean(d_sum, iterations)),
        gradient_error_ratio: ratio(mean(err_sum, iterations), mean(d_sum, iterations)),
        configured_kappa: match mode {
            NoiseModel::StepProportional { kappa_dir2 } => Some(*kappa_dir2),
            _ => None,
        },
    }
}
