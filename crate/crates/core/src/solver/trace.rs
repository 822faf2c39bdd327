use nalgebra::DVector;
use serde::Serialize;

use super::SolverConfig;
use crate::steps::NormalStepResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The switching test held: tangential step (and possibly a normal step).
    Tangential,
    /// The switching test failed: normal step only, `Γ` frozen.
    NormalOnly,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Tangential => "tangential",
            Branch::NormalOnly => "normal_only",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TangentialRecord {
    pub s_c: DVector<f64>,
    pub s_t: DVector<f64>,
    pub gamma_coeff: f64,
    pub model_cauchy: f64,
    pub model_step: f64,
    /// `‖B_k‖` from power iteration.
    pub b_norm: f64,
    pub refined: bool,
}

/// Everything computed during one iteration.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub k: usize,
    pub branch: Branch,
    pub x: DVector<f64>,
    pub x_plus: DVector<f64>,
    pub x_next: DVector<f64>,
    pub g: DVector<f64>,
    pub true_gradient: Option<DVector<f64>>,
    pub c_norm: f64,
    /// `‖c(x⁺)‖`.
    pub c_norm_plus: f64,
    pub omega_n: f64,
    pub d: DVector<f64>,
    /// `‖P_F[−G]‖` at `x`, when recorded.
    pub omega_t_true: Option<f64>,
    pub alpha: DVector<f64>,
    pub mu: usize,
    /// Accumulator before this iteration's update.
    pub gamma: DVector<f64>,
    /// Half-widths of the trust box.
    pub widths: DVector<f64>,
    pub s_l: DVector<f64>,
    pub normal: Option<NormalStepResult>,
    pub tangential: Option<TangentialRecord>,
}

impl StepDiagnostics {
    pub fn omega_t(&self) -> f64 {
        self.d.norm()
    }

    pub fn s_n(&self) -> DVector<f64> {
        match &self.normal {
            Some(n) => DVector::from_row_slice(&n.s_n),
            None => DVector::zeros(self.x.len()),
        }
    }
}

/// Ordered iteration records of one run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub problem: String,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub config: SolverConfig,
    pub records: Vec<StepDiagnostics>,
    /// Accumulator after the last iteration.
    pub final_gamma: DVector<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tangential(&self) -> impl Iterator<Item = &StepDiagnostics> {
        self.records.iter().filter(|r| r.branch == Branch::Tangential)
    }

    /// `‖d_k‖ + ‖c_k‖` per iteration.
    pub fn optimality_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.omega_t() + r.c_norm).collect()
    }
}
