use std::collections::VecDeque;

use nalgebra::DVector;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Problem, ProblemError};

/// Noise contract of a gradient oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `g = G(x)`.
    Exact,
    /// `g = G(x) + σ ξ`, `ξ ~ N(0, I)`.
    AdditiveGaussian { sigma: f64 },
    /// `g = G(x) + e` with `E‖e‖² = κ² ‖s_T‖²`, where `‖s_T‖` is the length of
    /// the most recent tangential step. Targets the total-variance condition
    /// along the step with constant `kappa_dir2`.
    StepProportional { kappa_dir2: f64 },
    /// Mini-batch mean of component gradients, sampled without replacement.
    /// A batch of at least `N` samples reproduces the full gradient exactly.
    FiniteSum { batch_size: usize },
    /// Error scale `Σ_j κ_j ‖s_{T,k-j}‖` over the last `coefficients.len()`
    /// tangential steps (`coefficients[0]` weighs the most recent one).
    HistoryRelaxed { coefficients: Vec<f64> },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |msg: String| Err(ProblemError::InvalidOracle(msg));
        match self {
            NoiseModel::Exact => Ok(()),
            NoiseModel::AdditiveGaussian { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => {
                bad(format!("sigma must be finite and >= 0, got {sigma}"))
            }
            NoiseModel::StepProportional { kappa_dir2 }
                if !(kappa_dir2.is_finite() && *kappa_dir2 >= 0.0) =>
            {
                bad(format!("kappa_dir2 must be finite and >= 0, got {kappa_dir2}"))
            }
            NoiseModel::FiniteSum { batch_size: 0 } => bad("batch_size must be positive".into()),
            NoiseModel::HistoryRelaxed { coefficients }
                if coefficients.is_empty()
                    || coefficients.iter().any(|k| !(k.is_finite() && *k >= 0.0)) =>
            {
                bad("history coefficients must be a nonempty list of finite values >= 0".into())
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NoiseModel::Exact => "exact",
            NoiseModel::AdditiveGaussian { .. } => "additive_gaussian",
            NoiseModel::StepProportional { .. } => "step_proportional",
            NoiseModel::FiniteSum { .. } => "finite_sum",
            NoiseModel::HistoryRelaxed { .. } => "history_relaxed",
        }
    }
}

/// Stateful gradient oracle. Owns its RNG, so one oracle belongs to one run.
#[derive(Debug, Clone)]
pub struct GradientOracle {
    model: NoiseModel,
    seed: u64,
    rng: ChaCha8Rng,
    recent_steps: VecDeque<f64>,
}

impl GradientOracle {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self {
            model,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            recent_steps: VecDeque::new(),
        }
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Feed back the length of an accepted tangential step.
    pub fn record_tangential_step(&mut self, norm: f64) {
        let keep = match &self.model {
            NoiseModel::StepProportional { .. } => 1,
            NoiseModel::HistoryRelaxed { coefficients } => coefficients.len(),
            _ => 0,
        };
        if keep == 0 {
            return;
        }
        self.recent_steps.push_front(norm);
        self.recent_steps.truncate(keep);
    }

    fn gaussian(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng))
    }

    /// Returns `(g, G)` where `G` is present iff the problem has a true gradient.
    pub fn sample(
        &mut self,
        problem: &Problem,
        x: &DVector<f64>,
    ) -> Result<(DVector<f64>, Option<DVector<f64>>), ProblemError> {
        let truth = problem.true_gradient(x)?;
        let need_truth = || {
            truth
                .clone()
                .ok_or_else(|| ProblemError::MissingTrueGradient(problem.name().to_string()))
        };
        let n = problem.dim();
        let g = match self.model.clone() {
            NoiseModel::Exact => need_truth()?,
            NoiseModel::AdditiveGaussian { sigma } => {
                let base = need_truth()?;
                if sigma == 0.0 {
                    base
                } else {
                    base + self.gaussian(n) * sigma
                }
            }
            NoiseModel::StepProportional { kappa_dir2 } => {
                let base = need_truth()?;
                let scale = kappa_dir2 * self.recent_steps.front().copied().unwrap_or(0.0);
                self.perturb(base, scale)
            }
            NoiseModel::HistoryRelaxed { coefficients } => {
                let base = need_truth()?;
                let scale: f64 = coefficients
                    .iter()
                    .zip(self.recent_steps.iter())
                    .map(|(k, s)| k * s)
                    .sum();
                self.perturb(base, scale)
            }
            NoiseModel::FiniteSum { batch_size } => {
                let comps = problem
                    .components()
                    .ok_or_else(|| ProblemError::NotFiniteSum(problem.name().to_string()))?;
                let total = comps.len();
                if batch_size >= total {
                    let all: Vec<usize> = (0..total).collect();
                    comps.batch_gradient(x, &all)
                } else {
                    let mut picked = index::sample(&mut self.rng, total, batch_size).into_vec();
                    picked.sort_unstable();
                    comps.batch_gradient(x, &picked)
                }
            }
        };
        Ok((g, truth))
    }

    /// Adds `scale · ξ / √n` so that `E‖e‖² = scale²`.
    fn perturb(&mut self, base: DVector<f64>, scale: f64) -> DVector<f64> {
        let n = base.len();
        // Draw even when the scale is zero to keep the stream aligned with k.
        let xi = self.gaussian(n);
        if scale == 0.0 || n == 0 {
            base
        } else {
            base + xi * (scale / (n as f64).sqrt())
        }
    }
}
