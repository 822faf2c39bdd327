use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::DiagnosticsError;
use crate::problem::{Problem, ProblemError};
use crate::projections::{least_squares_multiplier, ProjectionError};
use crate::solver::{SolverConfig, Trace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovRecord {
    pub rho: f64,
    pub lambda_hat: Vec<f64>,
    /// `f(x) + λ̂ᵀc(x)`.
    pub lagrangian: f64,
    /// `L + ρ‖c(x)‖`.
    pub psi: f64,
}

/// `ψ(x) = f(x) + λ̂ᵀc(x) + ρ‖c(x)‖` with `λ̂` the least-squares multiplier of `g`.
pub fn lyapunov(
    problem: &Problem,
    x: &DVector<f64>,
    g: &DVector<f64>,
    rho: f64,
) -> Result<LyapunovRecord, DiagnosticsError> {
    let f = problem.objective_value(x)?;
    let c = problem.constraint_value(x)?;
    let lambda_hat = if problem.eq_count() == 0 {
        DVector::zeros(0)
    } else {
        least_squares_multiplier(&problem.jacobian(x)?, g)?
    };
    let lagrangian = f + lambda_hat.dot(&c);
    Ok(LyapunovRecord {
        rho,
        lambda_hat: lambda_hat.as_slice().to_vec(),
        lagrangian,
        psi: lagrangian + rho * c.norm(),
    })
}

/// Sampled bounds and Lipschitz constants entering the penalty parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimates {
    /// `max ‖G + Jᵀλ̂‖`.
    pub kappa_g: f64,
    /// `max ‖c‖`.
    pub kappa_c: f64,
    /// `max ‖J‖`.
    pub kappa_j: f64,
    pub lip_lambda: f64,
    pub lip_c: f64,
    /// Lipschitz constant of `x ↦ G(x) + J(x)ᵀλ` at fixed `λ`.
    pub lip_lagrangian: f64,
    /// `min ω_N / ‖c‖` over the trace iterations with `c ≠ 0`.
    pub xi: f64,
    pub samples: usize,
}

/// `ρ = 2/(κ_n ξ) [(κ_g + κ_c L_λ) θ_N √n + κ_J κ_c (L_L/2 + L_λ L_c) θ_N² n + η]`.
pub fn rho_from_constants(k: &ConstantEstimates, n: usize, config: &SolverConfig) -> f64 {
    let nf = n as f64;
    let theta = config.theta_n;
    let bracket = (k.kappa_g + k.kappa_c * k.lip_lambda) * theta * nf.sqrt()
        + k.kappa_j * k.kappa_c * (0.5 * k.lip_lagrangian + k.lip_lambda * k.lip_c) * theta * theta * nf
        + config.eta;
    2.0 / (config.kappa_n * k.xi) * bracket
}

struct PointData {
    x: DVector<f64>,
    c: DVector<f64>,
    j: DMatrix<f64>,
    grad: DVector<f64>,
    lambda: DVector<f64>,
}

fn point_data(problem: &Problem, x: DVector<f64>) -> Result<Option<PointData>, DiagnosticsError> {
    let grad = problem
        .true_gradient(&x)?
        .ok_or_else(|| ProblemError::MissingTrueGradient(problem.name().to_string()))?;
    let c = problem.constraint_value(&x)?;
    let j = problem.jacobian(&x)?;
    let lambda = if problem.eq_count() == 0 {
        DVector::zeros(0)
    } else {
        match least_squares_multiplier(&j, &grad) {
            Ok(l) => l,
            Err(ProjectionError::RankDeficient { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    };
    Ok(Some(PointData { x, c, j, grad, lambda }))
}

/// Estimates the constants over the region visited by `trace`.
///
/// Points are the iterates plus `samples` uniform draws from their bounding
/// box; each draw is paired with a nearby point and with the previous draw,
/// so both local and global difference quotients enter the maxima.
pub fn estimate_constants(
    problem: &Problem,
    trace: &Trace,
    samples: usize,
    seed: u64,
) -> Result<ConstantEstimates, DiagnosticsError> {
    if trace.is_empty() {
        return Err(DiagnosticsError::TraceTooShort { len: 0, min: 1 });
    }
    let n = problem.dim();
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for r in &trace.records {
        for p in [&r.x, &r.x_plus, &r.x_next] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    let diameter = (&hi - &lo).norm().max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(n, |i, _| {
            if hi[i] > lo[i] {
                rng.random_range(lo[i]..=hi[i])
            } else {
                lo[i]
            }
        })
    };

    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let stride = (trace.len() / 500).max(1);
    for r in trace.records.iter().step_by(stride) {
        pairs.push((r.x.clone(), r.x_next.clone()));
        if r.x_plus != r.x {
            pairs.push((r.x.clone(), r.x_plus.clone()));
        }
    }
    let mut previous = draw(&mut rng);
    for _ in 0..samples {
        let a = draw(&mut rng);
        let h = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let near = &a + h * (1e-4 * diameter / (n as f64).sqrt());
        let near = crate::vecops::clamp(&near, problem.lower(), problem.upper());
        pairs.push((a.clone(), near));
        pairs.push((a.clone(), previous));
        previous = a;
    }

    let mut est = ConstantEstimates {
        kappa_g: 0.0,
        kappa_c: 0.0,
        kappa_j: 0.0,
        lip_lambda: 0.0,
        lip_c: 0.0,
        lip_lagrangian: 0.0,
        xi: f64::INFINITY,
        samples: 0,
    };
    for r in &trace.records {
        est.kappa_g = est.kappa_g.max(r.d.norm());
        if r.c_norm > 0.0 {
            est.xi = est.xi.min(r.omega_n / r.c_norm);
        }
    }
    for (a, b) in pairs {
        let dist = (&a - &b).norm();
        let (Some(pa), Some(pb)) = (point_data(problem, a)?, point_data(problem, b)?) else {
            continue;
        };
        est.samples += 1;
        for p in [&pa, &pb] {
            est.kappa_g = est.kappa_g.max((&p.grad + p.j.transpose() * &p.lambda).norm());
            est.kappa_c = est.kappa_c.max(p.c.norm());
            est.kappa_j = est.kappa_j.max(p.j.norm());
        }
        if dist == 0.0 {
            continue;
        }
        est.lip_c = est.lip_c.max((&pa.c - &pb.c).norm() / dist);
        est.lip_lambda = est.lip_lambda.max((&pa.lambda - &pb.lambda).norm() / dist);
        let grad_l = |p: &PointData| &p.grad + p.j.transpose() * &pa.lambda;
        est.lip_lagrangian = est.lip_lagrangian.max((grad_l(&pa) - grad_l(&pb)).norm() / dist);
        debug_assert_eq!(pa.x.len(), pb.x.len());
    }
    if !est.xi.is_finite() {
        // Feasible throughout: any positive value gives a valid bound.
        est.xi = 1.0;
    }
    Ok(est)
}

/// Outcome of the normal-step decrease check `ψ(x⁺) − ψ(x) <= −η ω_N + slack`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalDecrease {
    pub rho: f64,
    pub normal_steps: usize,
    pub satisfied: usize,
    /// Largest `ψ(x⁺) − ψ(x) + η ω_N` seen.
    pub worst_excess: f64,
}

impl NormalDecrease {
    /// Fraction of normal steps meeting the bound; 1 when there are none.
    pub fn fraction(&self) -> f64 {
        if self.normal_steps == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.normal_steps as f64
        }
    }
}

/// Evaluates the decrease of `ψ` across every normal step of a trace, with
/// `ψ` built from the true gradient at both points.
pub fn normal_step_decrease(
    problem: &Problem,
    trace: &Trace,
    rho: f64,
    slack: f64,
) -> Result<NormalDecrease, DiagnosticsError> {
    let eta = trace.config.eta;
    let mut out = NormalDecrease {
        rho,
        normal_steps: 0,
        satisfied: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    let psi = |x: &DVector<f64>| -> Result<f64, DiagnosticsError> {
        let g = problem
            .true_gradient(x)?
            .ok_or_else(|| DiagnosticsError::Unavailable("ψ needs the true gradient".into()))?;
        Ok(lyapunov(problem, x, &g, rho)?.psi)
    };
    for r in trace.records.iter().filter(|r| r.normal.is_some()) {
        let excess = psi(&r.x_plus)? - psi(&r.x)? + eta * r.omega_n;
        out.normal_steps += 1;
        if excess <= slack {
            out.satisfied += 1;
        }
        out.worst_excess = out.worst_excess.max(excess);
    }
    Ok(out)
}
