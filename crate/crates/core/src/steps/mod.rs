//! AdaGrad stepsizes, the trust box, and the normal and tangential steps.

mod normal;
mod tangential;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use normal::{normal_step, NormalStepOutcome, NormalStepResult};
pub use tangential::{tangential_step, TangentialStepResult};

/// Trust-box half-width used for a component whose projected direction is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDirectionWidth {
    /// Width `α_i |d_i| = 0`: the component stays fixed.
    #[default]
    Zero,
    /// Scaling entry `Δ_ii = 1`, i.e. width 1.
    Unit,
}

/// Per-component AdaGrad accumulator and the stepsizes derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeState {
    gamma: DVector<f64>,
    eta: f64,
    varsigma: f64,
    alpha: DVector<f64>,
    mu: usize,
}

impl StepSizeState {
    pub fn new(n: usize, eta: f64, varsigma: f64) -> Self {
        Self {
            gamma: DVector::zeros(n),
            eta,
            varsigma,
            alpha: DVector::from_element(n, eta / varsigma.sqrt()),
            mu: 0,
        }
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Index of the smallest stepsize.
    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn varsigma(&self) -> f64 {
        self.varsigma
    }

    /// `α_i = η / √(Γ_i + d_i² + ς)`; `Γ` is left untouched.
    pub fn update_stepsizes(&mut self, d: &DVector<f64>) {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..d.len() {
            let denom = (self.gamma[i] + d[i] * d[i] + self.varsigma).sqrt();
            self.alpha[i] = self.eta / denom;
            // Strict comparison keeps the lowest index on ties.
            if denom > worst {
                worst = denom;
                self.mu = i;
            }
        }
    }

    /// `Γ_i += d_i²`, on tangential iterations only.
    pub fn accumulate_gamma(&mut self, d: &DVector<f64>) {
        self.gamma += d.component_mul(d);
    }

    /// Diagonal of `Δ = diag(1 / (α_i |d_i|))`, with `Δ_ii = 1` when `d_i = 0`.
    pub fn scaling(&self, d: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(d.len(), |i, _| {
            if d[i] == 0.0 {
                1.0
            } else {
                1.0 / (self.alpha[i] * d[i].abs())
            }
        })
    }

    /// Half-widths of the trust box `S = {|y_i| <= w_i}`.
    pub fn trust_widths(&self, d: &DVector<f64>, rule: ZeroDirectionWidth) -> DVector<f64> {
        DVector::from_fn(d.len(), |i, _| {
            if d[i] == 0.0 {
                match rule {
                    ZeroDirectionWidth::Zero => 0.0,
                    ZeroDirectionWidth::Unit => 1.0,
                }
            } else {
                self.alpha[i] * d[i].abs()
            }
        })
    }

    /// Overrides the stepsizes; used only for fault injection.
    pub(crate) fn scale_alpha(&mut self, factor: f64) {
        self.alpha *= factor;
    }
}

/// Quadratic model `m(s) = gᵀs + ½ sᵀBs`.
pub fn model_value(g: &DVector<f64>, b: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * s.dot(&(b * s))
}

/// Minimizer of the model along `t s_L`, `t ∈ [0, 1]`: returns `(γ, γ s_L)`.
pub fn cauchy_step(g: &DVector<f64>, s_l: &DVector<f64>, b: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let curvature = s_l.dot(&(b * s_l));
    // `−gᵀs_L >= ‖s_L‖² >= 0` in exact arithmetic; the clamp absorbs rounding.
    let gamma = if curvature > 0.0 {
        (-g.dot(s_l) / curvature).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (gamma, s_l * gamma)
}
