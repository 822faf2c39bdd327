use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

use crate::solver::{Branch, Trace};
use crate::vecops;

/// Relative slack of every check: `lhs <= rhs + LEMMA_TOL · max(1, |lhs|, |rhs|)`.
pub const LEMMA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `gᵀd <= −‖d‖²`.
    DirectionDescent,
    /// `α_i |d_i| < 1`.
    StepsizeTimesDirection,
    /// `gᵀs_L <= −¾ min(α_μ, 1) ‖d‖²`.
    TrustStepDescent,
    /// `|gᵀs_L| >= ‖s_L‖²`.
    TrustStepAngle,
    /// `|s_{T,i}| <= α_i |d_i|`.
    TangentialComponentBound,
    /// `s_T` in the bounds and trust box, `‖s_T‖ >= ‖s_C‖`, `m(s_T) <= τ m(s_C)`.
    TangentialAcceptance,
    /// `‖s_C‖ >= ‖s_L‖ / max(1, ‖B‖)`.
    CauchyLength,
    /// Upper bound on `gᵀs_T` in terms of `‖d‖²` and `Σ α_i² d_i²`.
    QuadraticDecrease,
    /// `s_N` keeps the bounds and `‖s_N‖_∞ <= θ_N ω_N`.
    NormalStepBound,
    /// `½‖c(x + s_N)‖² <= ½‖c‖² − κ_n ω_N²`.
    NormalDescent,
    /// Prefix sums of `min(α_μ, 1) ‖d‖²` dominate `η√ς √Θ − η max(η, √ς)`.
    AdagradLowerSum,
    /// Per-component prefix sums of `α_i² d_i²` stay below `η² log Θ`.
    AdagradLogBound,
}

impl Inequality {
    pub const ALL: [Inequality; 12] = [
        Inequality::DirectionDescent,
        Inequality::StepsizeTimesDirection,
        Inequality::TrustStepDescent,
        Inequality::TrustStepAngle,
        Inequality::TangentialComponentBound,
        Inequality::TangentialAcceptance,
        Inequality::CauchyLength,
        Inequality::QuadraticDecrease,
        Inequality::NormalStepBound,
        Inequality::NormalDescent,
        Inequality::AdagradLowerSum,
        Inequality::AdagradLogBound,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Inequality::DirectionDescent => "direction_descent",
            Inequality::StepsizeTimesDirection => "stepsize_times_direction",
            Inequality::TrustStepDescent => "trust_step_descent",
            Inequality::TrustStepAngle => "trust_step_angle",
            Inequality::TangentialComponentBound => "tangential_component_bound",
            Inequality::TangentialAcceptance => "tangential_acceptance",
            Inequality::CauchyLength => "cauchy_length",
            Inequality::QuadraticDecrease => "quadratic_decrease",
            Inequality::NormalStepBound => "normal_step_bound",
            Inequality::NormalDescent => "normal_descent",
            Inequality::AdagradLowerSum => "adagrad_lower_sum",
            Inequality::AdagradLogBound => "adagrad_log_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub k: usize,
    pub component: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`, positive when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaReport {
    /// Number of instances checked per inequality.
    pub checked: BTreeMap<Inequality, usize>,
    pub violations: Vec<Violation>,
}

impl LemmaReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, inequality: Inequality) -> usize {
        self.violations.iter().filter(|v| v.inequality == inequality).count()
    }

    pub fn merge(&mut self, other: LemmaReport) {
        for (k, v) in other.checked {
            *self.checked.entry(k).or_default() += v;
        }
        self.violations.extend(other.violations);
    }

    fn expect_le(&mut self, inequality: Inequality, k: usize, component: Option<usize>, lhs: f64, rhs: f64) {
        *self.checked.entry(inequality).or_default() += 1;
        let scale = 1.0f64.max(lhs.abs()).max(rhs.abs());
        if !(lhs <= rhs + LEMMA_TOL * scale) {
            self.violations.push(Violation {
                inequality,
                k,
                component,
                lhs,
                rhs,
                slack: lhs - rhs,
            });
        }
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>10} {:>10}", "inequality", "checked", "violated")?;
        for inequality in Inequality::ALL {
            let checked = self.checked.get(&inequality).copied().unwrap_or(0);
            if checked == 0 && self.count(inequality) == 0 {
                continue;
            }
            writeln!(f, "{:<28} {:>10} {:>10}", inequality.label(), checked, self.count(inequality))?;
        }
        for v in self.violations.iter().take(20) {
            writeln!(
                f,
                "  {} at k={}{}: lhs={:.6e} rhs={:.6e} slack={:.3e}",
                v.inequality.label(),
                v.k,
                v.component.map(|i| format!(" i={i}")).unwrap_or_default(),
                v.lhs,
                v.rhs,
                v.slack
            )?;
        }
        if self.violations.len() > 20 {
            writeln!(f, "  ... {} more", self.violations.len() - 20)?;
        }
        Ok(())
    }
}

/// Checks every per-iteration inequality of the method over a trace.
///
/// The stepsizes, directions and accumulator values are taken from the trace
/// as recorded, so corrupted stepsizes surface as violations.
pub fn check_lemma_inequalities(trace: &Trace) -> LemmaReport {
    let mut report = LemmaReport::default();
    let cfg = &trace.config;
    let (eta, varsigma) = (cfg.eta, cfg.varsigma);
    let n = trace.lower.len();
    let mut lower_sum = 0.0;
    let mut log_sums = DVector::<f64>::zeros(n);

    for r in &trace.records {
        let k = r.k;
        let d_sq = r.d.norm_squared();
        report.expect_le(Inequality::DirectionDescent, k, None, r.g.dot(&r.d), -d_sq);
        for i in 0..n {
            *report.checked.entry(Inequality::StepsizeTimesDirection).or_default() += 1;
            let product = r.alpha[i] * r.d[i].abs();
            if !(product < 1.0) {
                report.violations.push(Violation {
                    inequality: Inequality::StepsizeTimesDirection,
                    k,
                    component: Some(i),
                    lhs: product,
                    rhs: 1.0,
                    slack: product - 1.0,
                });
            }
        }
        let gsl = r.g.dot(&r.s_l);
        report.expect_le(Inequality::TrustStepAngle, k, None, r.s_l.norm_squared(), gsl.abs());

        if let Some(normal) = &r.normal {
            let s_n = DVector::from_row_slice(&normal.s_n);
            let moved = &r.x + &s_n;
            let outside = vecops::box_violation(&moved, &trace.lower, &trace.upper);
            report.expect_le(Inequality::NormalStepBound, k, None, outside, 0.0);
            report.expect_le(Inequality::NormalStepBound, k, None, s_n.amax(), cfg.theta_n * normal.omega_n);
            report.expect_le(
                Inequality::NormalDescent,
                k,
                None,
                normal.half_csq_after,
                normal.half_csq_before - cfg.kappa_n * normal.omega_n * normal.omega_n,
            );
        }

        if r.branch != Branch::Tangential {
            continue;
        }
        let Some(t) = &r.tangential else { continue };
        let min_alpha = r.alpha[r.mu].min(1.0);
        report.expect_le(Inequality::TrustStepDescent, k, None, gsl, -0.75 * min_alpha * d_sq);

        let mut weighted = 0.0;
        for i in 0..n {
            let bound = r.alpha[i] * r.d[i].abs();
            report.expect_le(Inequality::TangentialComponentBound, k, Some(i), t.s_t[i].abs(), bound);
            weighted += bound * bound;
        }

        let trust_excess = DVector::from_fn(n, |i, _| t.s_t[i].abs() - r.widths[i]).max().max(0.0);
        let bound_excess = vecops::box_violation(&(&r.x + &t.s_t), &trace.lower, &trace.upper);
        report.expect_le(Inequality::TangentialAcceptance, k, None, trust_excess.max(bound_excess), 0.0);
        report.expect_le(Inequality::TangentialAcceptance, k, None, t.s_c.norm(), t.s_t.norm());
        report.expect_le(Inequality::TangentialAcceptance, k, None, t.model_step, cfg.tau * t.model_cauchy);

        let b_scale = t.b_norm.max(1.0);
        report.expect_le(Inequality::CauchyLength, k, None, r.s_l.norm() / b_scale, t.s_c.norm());

        let rhs = -3.0 * cfg.tau / (4.0 * (2.0 * t.b_norm).max(1.0)) * min_alpha * d_sq
            + 0.5 * t.b_norm * weighted;
        report.expect_le(Inequality::QuadraticDecrease, k, None, r.g.dot(&t.s_t), rhs);

        // Accumulator sums over the tangential subsequence.
        let gamma_next = &r.gamma + r.d.component_mul(&r.d);
        let theta_next = 1.0 + gamma_next.max().max(0.0) / varsigma;
        lower_sum += min_alpha * d_sq;
        let ag1_rhs = eta * varsigma.sqrt() * theta_next.sqrt() - eta * eta.max(varsigma.sqrt());
        report.expect_le(Inequality::AdagradLowerSum, k, None, ag1_rhs, lower_sum);
        let log_bound = eta * eta * theta_next.ln();
        for i in 0..n {
            log_sums[i] += (r.alpha[i] * r.d[i]).powi(2);
            report.expect_le(Inequality::AdagradLogBound, k, Some(i), log_sums[i], log_bound);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{SolverConfig, StepDiagnostics, TangentialRecord};

    fn hand_trace(d: DVector<f64>, alpha: DVector<f64>) -> Trace {
        let n = d.len();
        let g = -&d;
        let widths = alpha.component_mul(&d.abs());
        let s_l = vecops::clamp(&d, &-&widths, &widths);
        let record = StepDiagnostics {
            k: 0,
            branch: Branch::Tangential,
            x: DVector::zeros(n),
            x_plus: DVector::zeros(n),
            x_next: s_l.clone(),
            g: g.clone(),
            true_gradient: Some(g.clone()),
            c_norm: 0.0,
            c_norm_plus: 0.0,
            omega_n: 0.0,
            d: d.clone(),
            omega_t_true: Some(d.norm()),
            alpha: alpha.clone(),
            mu: 0,
            gamma: DVector::zeros(n),
            widths,
            s_l: s_l.clone(),
            normal: None,
            tangential: Some(TangentialRecord {
                s_c: s_l.clone(),
                s_t: s_l.clone(),
                gamma_coeff: 1.0,
                model_cauchy: g.dot(&s_l),
                model_step: g.dot(&s_l),
                b_norm: 0.0,
                refined: false,
            }),
        };
        Trace {
            problem: "hand".into(),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            config: SolverConfig::default(),
            records: vec![record],
            final_gamma: d.component_mul(&d),
        }
    }

    #[test]
    fn empty_trace_gives_empty_report() {
        let mut t = hand_trace(DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.5, 1.0]));
        t.records.clear();
        let r = check_lemma_inequalities(&t);
        assert!(r.is_clean() && r.checked.is_empty());
    }

    #[test]
    fn single_iteration_log_bound_by_hand() {
        // d = (1, 0), Γ = 0, η = ς = 1: α₁ = 1/√2, α₁²d₁² = ½ <= log 2.
        let alpha = DVector::from_vec(vec![0.5_f64.sqrt(), 1.0]);
        let t = hand_trace(DVector::from_vec(vec![1.0, 0.0]), alpha);
        let r = check_lemma_inequalities(&t);
        assert!(r.is_clean(), "{r}");
        assert_eq!(r.checked[&Inequality::AdagradLogBound], 2);
    }

    #[test]
    fn oversized_stepsizes_are_flagged() {
        let alpha = DVector::from_vec(vec![2.0, 2.0]);
        let t = hand_trace(DVector::from_vec(vec![1.0, 0.5]), alpha);
        let r = check_lemma_inequalities(&t);
        assert!(r.count(Inequality::StepsizeTimesDirection) >= 1);
        assert!(r.count(Inequality::AdagradLogBound) >= 1);
    }
}
