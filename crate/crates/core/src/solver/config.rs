use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::HessianKind;
use crate::projections::TOL_EQ;
use crate::steps::ZeroDirectionWidth;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid solver configuration: {field} = {value} ({rule})")]
pub struct ConfigError {
    pub field: &'static str,
    pub value: String,
    pub rule: &'static str,
}

/// When to compute a normal step at iterations that pass the switching test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalAtSwitch {
    #[default]
    Never,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub theta_n: f64,
    /// Retained for completeness; no step uses it.
    pub theta_t: f64,
    pub beta: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub tau: f64,
    pub kappa_n: f64,
    pub eps_d: f64,
    pub eps_c: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub hessian: HessianKind,
    pub refine: bool,
    /// Constraint evaluations allowed per normal step.
    pub normal_budget: usize,
    pub normal_at_switch: NormalAtSwitch,
    pub zero_direction_width: ZeroDirectionWidth,
    /// KKT residual target of the iterative projection.
    pub projection_tol: f64,
    /// `‖c‖` at or below this counts as feasible in the switch test, so
    /// rounding-level violations never trigger a normal step.
    pub feasibility_floor: f64,
    /// Record `‖P_F[−G]‖` per iteration when the true gradient is known.
    pub record_true_measure: bool,
    /// Multiplies every stepsize after it is computed. Fault injection only.
    pub fault_alpha_scale: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta_n: 2.0,
            theta_t: 2.0,
            beta: 0.5,
            eta: 1.0,
            varsigma: 1.0,
            tau: 1.0,
            kappa_n: 1e-4,
            eps_d: 1e-6,
            eps_c: 1e-6,
            max_iter: 100_000,
            seed: 0,
            hessian: HessianKind::Zero,
            refine: false,
            normal_budget: 31,
            normal_at_switch: NormalAtSwitch::Never,
            zero_direction_width: ZeroDirectionWidth::Zero,
            projection_tol: TOL_EQ,
            feasibility_floor: 1e-12,
            record_true_measure: true,
            fault_alpha_scale: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(field: &'static str, value: f64, ok: bool, rule: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError {
                    field,
                    value: value.to_string(),
                    rule,
                })
            }
        }
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        check("theta_n", self.theta_n, self.theta_n > 1.0 && self.theta_n.is_finite(), "must be > 1")?;
        check("theta_t", self.theta_t, self.theta_t > 1.0 && self.theta_t.is_finite(), "must be > 1")?;
        check("beta", self.beta, unit(self.beta), "must lie in (0, 1]")?;
        check("eta", self.eta, unit(self.eta), "must lie in (0, 1]")?;
        check("varsigma", self.varsigma, unit(self.varsigma), "must lie in (0, 1]")?;
        check("tau", self.tau, unit(self.tau), "must lie in (0, 1]")?;
        check(
            "kappa_n",
            self.kappa_n,
            self.kappa_n > 0.0 && self.kappa_n < 0.5,
            "must lie in (0, 1/2)",
        )?;
        check("eps_d", self.eps_d, self.eps_d > 0.0 && self.eps_d.is_finite(), "must be > 0")?;
        check("eps_c", self.eps_c, self.eps_c > 0.0 && self.eps_c.is_finite(), "must be > 0")?;
        check(
            "normal_budget",
            self.normal_budget as f64,
            self.normal_budget >= 1,
            "must be >= 1",
        )?;
        check(
            "projection_tol",
            self.projection_tol,
            self.projection_tol > 0.0 && self.projection_tol.is_finite(),
            "must be > 0",
        )?;
        check(
            "feasibility_floor",
            self.feasibility_floor,
            self.feasibility_floor >= 0.0 && self.feasibility_floor.is_finite(),
            "must be >= 0",
        )?;
        if let HessianKind::LimitedMemorySecant { memory } = self.hessian {
            check("hessian.memory", memory as f64, memory >= 1, "must be >= 1")?;
        }
        if let Some(scale) = self.fault_alpha_scale {
            check(
                "fault_alpha_scale",
                scale,
                scale > 0.0 && scale.is_finite(),
                "must be finite and > 0",
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn ranges_are_enforced() {
        let bad = |f: fn(&mut SolverConfig)| {
            let mut c = SolverConfig::default();
            f(&mut c);
            c.validate().unwrap_err().field
        };
        assert_eq!(bad(|c| c.beta = 1.5), "beta");
        assert_eq!(bad(|c| c.eta = 0.0), "eta");
        assert_eq!(bad(|c| c.theta_n = 1.0), "theta_n");
        assert_eq!(bad(|c| c.kappa_n = 0.5), "kappa_n");
        assert_eq!(bad(|c| c.eps_c = 0.0), "eps_c");
        assert_eq!(bad(|c| c.varsigma = f64::NAN), "varsigma");
    }

    #[test]
    fn json_round_trip() {
        let c = SolverConfig {
            hessian: HessianKind::LimitedMemorySecant { memory: 3 },
            fault_alpha_scale: Some(0.5),
            ..SolverConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        let back: SolverConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
