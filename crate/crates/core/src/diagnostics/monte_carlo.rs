use rayon::prelude::*;
use serde::Serialize;

use super::{mean_curve, running_average, DiagnosticsError};
use crate::problem::{GradientOracle, NoiseModel, Problem};
use crate::solver::{solve, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub seeds: Vec<u64>,
    /// Seed-mean of the running average of `‖d_k‖ + ‖c_k‖`.
    pub mean_running_average: Vec<f64>,
    /// Seed-mean of the fraction of tangential iterations.
    pub mean_tangential_fraction: f64,
}

/// Independent runs over `seeds`, in parallel, reduced in seed order.
///
/// Every run must produce exactly `config.max_iter` iterations, which
/// callers ensure with tiny termination tolerances.
pub fn monte_carlo_running_average(
    problem: &Problem,
    model: &NoiseModel,
    config: &SolverConfig,
    seeds: &[u64],
) -> Result<MonteCarloSummary, DiagnosticsError> {
    let runs: Vec<Result<(Vec<f64>, f64), DiagnosticsError>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut oracle = GradientOracle::new(model.clone(), seed);
            let cfg = SolverConfig {
                seed,
                ..config.clone()
            };
            let out = solve(problem, &mut oracle, &cfg)?;
            if let Some(e) = out.error {
                return Err(DiagnosticsError::Unavailable(format!("seed {seed}: {e}")));
            }
            let curve = running_average(&out.trace.optimality_series());
            let fraction = out.trace.tangential().count() as f64 / out.trace.len().max(1) as f64;
            Ok((curve, fraction))
        })
        .collect();
    let mut curves = Vec::with_capacity(runs.len());
    let mut fraction = 0.0;
    for run in runs {
        let (curve, f) = run?;
        curves.push(curve);
        fraction += f;
    }
    Ok(MonteCarloSummary {
        seeds: seeds.to_vec(),
        mean_running_average: mean_curve(&curves),
        mean_tangential_fraction: fraction / seeds.len().max(1) as f64,
    })
}
