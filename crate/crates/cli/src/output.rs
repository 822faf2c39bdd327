//! Trace CSV and summary JSON writers.
//!
//! Trace columns, one row per iteration:
//! `k, branch, norm_d, omega_n, c_norm, omega_t_true, min_alpha, max_gamma, psi`.
//! `omega_t_true` is empty without a true gradient and `psi` is empty without
//! an objective. A run that stops with final measures gets one extra row,
//! branch `terminal`, describing the returned point; its `min_alpha` is empty
//! because no stepsize is computed there. Floats use `{:.16e}`, 17 significant digits, so every value
//! reads back bit for bit.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use stradic::diagnostics::{estimate_constants, lyapunov, rho_from_constants};
use stradic::{Problem, SolveOutcome, Trace};

use crate::CliError;

pub const TRACE_COLUMNS: [&str; 9] = [
    "k",
    "branch",
    "norm_d",
    "omega_n",
    "c_norm",
    "omega_t_true",
    "min_alpha",
    "max_gamma",
    "psi",
];

/// Sample count for the constant estimates behind the Lyapunov penalty.
const RHO_SAMPLES: usize = 2000;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Penalty parameter estimated over the visited region, when `ψ` is defined.
pub fn estimated_rho(problem: &Problem, trace: &Trace, seed: u64) -> Result<Option<f64>, CliError> {
    if !problem.has_objective() || trace.is_empty() {
        return Ok(None);
    }
    let constants = estimate_constants(problem, trace, RHO_SAMPLES, seed).map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(Some(rho_from_constants(&constants, problem.dim(), &trace.config)))
}

fn psi_at(problem: &Problem, x: &DVector<f64>, g: &DVector<f64>, rho: Option<f64>) -> Result<Option<f64>, CliError> {
    rho.map(|rho| lyapunov(problem, x, g, rho).map(|rec| rec.psi))
        .transpose()
        .map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn trace_rows(problem: &Problem, out: &SolveOutcome, rho: Option<f64>) -> Result<Vec<Vec<String>>, CliError> {
    let trace = &out.trace;
    let mut rows = trace
        .records
        .iter()
        .map(|r| {
            let psi = psi_at(problem, &r.x, r.true_gradient.as_ref().unwrap_or(&r.g), rho)?;
            Ok(vec![
                r.k.to_string(),
                r.branch.label().to_string(),
                fmt_float(r.omega_t()),
                fmt_float(r.omega_n),
                fmt_float(r.c_norm),
                fmt_opt(r.omega_t_true),
                fmt_float(r.alpha.min()),
                fmt_float(r.gamma.max()),
                fmt_opt(psi),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(m) = out.measures {
        let g = problem.true_gradient(&out.x).map_err(|e| CliError::Invalid(e.to_string()))?;
        let psi = match g {
            Some(g) => psi_at(problem, &out.x, &g, rho)?,
            None => None,
        };
        rows.push(vec![
            out.iterations.to_string(),
            "terminal".into(),
            fmt_float(m.omega_t),
            fmt_float(m.omega_n),
            fmt_float(m.c_norm),
            fmt_opt(m.omega_t_true),
            String::new(),
            fmt_float(trace.final_gamma.max()),
            fmt_opt(psi),
        ]);
    }
    Ok(rows)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub status: String,
    pub iterations: usize,
    pub norm_d: Option<f64>,
    pub omega_n: Option<f64>,
    pub c_norm: Option<f64>,
    pub omega_t_true: Option<f64>,
    pub theta: Option<f64>,
    pub x: Vec<f64>,
    /// `‖x − x*‖` when the problem knows its solution.
    pub distance_to_solution: Option<f64>,
    pub error: Option<String>,
    pub trace: String,
}

impl SeedSummary {
    pub fn new(problem: &Problem, seed: u64, out: &SolveOutcome, trace_file: String) -> Self {
        let m = out.measures;
        Self {
            seed,
            status: out.status.label().to_string(),
            iterations: out.iterations,
            norm_d: m.map(|m| m.omega_t),
            omega_n: m.map(|m| m.omega_n),
            c_norm: m.map(|m| m.c_norm),
            omega_t_true: m.and_then(|m| m.omega_t_true),
            theta: m.map(|m| m.theta),
            x: out.x.as_slice().to_vec(),
            distance_to_solution: problem.solution().map(|s| (&out.x - s).norm()),
            error: out.error.clone(),
            trace: trace_file,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    /// `converged` when every seed converged, else the first other status.
    pub status: String,
    pub spec: serde_json::Value,
    pub seeds: Vec<SeedSummary>,
    pub wall_time_s: f64,
}

pub const SUMMARY_FIELDS: [&str; 4] = ["status", "spec", "seeds", "wall_time_s"];
pub const SEED_FIELDS: [&str; 12] = [
    "seed",
    "status",
    "iterations",
    "norm_d",
    "omega_n",
    "c_norm",
    "omega_t_true",
    "theta",
    "x",
    "distance_to_solution",
    "error",
    "trace",
];
