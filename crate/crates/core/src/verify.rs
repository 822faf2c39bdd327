//! Property suite: projection oracle equivalence, per-iteration inequality
//! sweeps, AdaGrad sum bounds and gradient-noise sanity checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{check_lemma_inequalities, noise_condition_monitor, Inequality, LemmaReport};
use crate::problem::{GradientOracle, NoiseModel, Problem, Registry};
use crate::projections::{
    brute_force_projection, project_tangent_box, project_tangent_two_boxes, TangentBoxSet, TangentSpace,
};
use crate::solver::{solve, SolverConfig};

/// Agreement required between the iterative projection and the enumeration oracle.
pub const PROJECTION_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSection {
    Projections,
    Lemmas,
    Adagrad,
    Noise,
}

impl SuiteSection {
    pub const ALL: [SuiteSection; 4] = [
        SuiteSection::Projections,
        SuiteSection::Lemmas,
        SuiteSection::Adagrad,
        SuiteSection::Noise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SuiteSection::Projections => "projections",
            SuiteSection::Lemmas => "lemmas",
            SuiteSection::Adagrad => "adagrad",
            SuiteSection::Noise => "noise",
        }
    }
}

impl FromStr for SuiteSection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteSection::ALL
            .into_iter()
            .find(|section| section.label() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SuiteSection::ALL.iter().map(|s| s.label()).collect();
                format!("unknown suite section '{s}', expected one of {}", names.join(", "))
            })
    }
}

/// The two inequalities bounding the AdaGrad sums; the rest are per-iteration.
pub fn is_adagrad_inequality(inequality: Inequality) -> bool {
    matches!(inequality, Inequality::AdagradLowerSum | Inequality::AdagradLogBound)
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub sections: Vec<SuiteSection>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub projection_instances: usize,
    pub instance_seed: u64,
    /// Passed through to every solve of the inequality sweep.
    pub fault_alpha_scale: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            sections: SuiteSection::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            iterations: 5000,
            projection_instances: 1000,
            instance_seed: 0,
            fault_alpha_scale: None,
        }
    }
}

/// Oracles used by the inequality sweep.
pub fn sweep_noise_models() -> Vec<NoiseModel> {
    vec![
        NoiseModel::Exact,
        NoiseModel::AdditiveGaussian { sigma: 1e-2 },
        NoiseModel::StepProportional { kappa_dir2: 0.1 },
    ]
}

/// Configuration for runs of a fixed length: termination never triggers early.
pub fn fixed_length_config(iterations: usize) -> SolverConfig {
    SolverConfig {
        max_iter: iterations,
        eps_d: f64::MIN_POSITIVE,
        eps_c: f64::MIN_POSITIVE,
        ..SolverConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInstance {
    pub g: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub trust: DVector<f64>,
}

/// Random instance with `n <= 6`, `m <= min(2, n − 1)`, full-rank `J`,
/// `lo <= 0 <= hi` and a mix of finite and infinite bounds.
pub fn random_projection_instance<R: Rng>(rng: &mut R) -> ProjectionInstance {
    let n = rng.random_range(1..=6usize);
    let m = rng.random_range(0..=2usize.min(n - 1));
    let jacobian = loop {
        let j = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        if m == 0 || TangentSpace::new(j.clone()).is_ok_and(|s| s.sigma_min() > 1e-3 * s.norm()) {
            break j;
        }
    };
    let mut bound = |sign: f64| match rng.random_range(0..4u8) {
        0 => sign * f64::INFINITY,
        1 => 0.0,
        _ => sign * rng.random_range(0.05..2.0),
    };
    let lo = DVector::from_fn(n, |_, _| bound(-1.0));
    let hi = DVector::from_fn(n, |_, _| bound(1.0));
    let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let trust = DVector::from_fn(n, |_, _| rng.random_range(0.01..1.5));
    ProjectionInstance { g, jacobian, lo, hi, trust }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProjectionCheck {
    pub instances: usize,
    pub max_error: f64,
    pub failures: Vec<String>,
}

/// Solves one instance both ways and returns the larger of the two gaps to the
/// oracle (plain box, then box intersected with the trust box).
pub fn compare_with_oracle(inst: &ProjectionInstance, tol: f64) -> Result<f64, String> {
    let space = TangentSpace::new(inst.jacobian.clone()).map_err(|e| e.to_string())?;
    let set = TangentBoxSet::new(&space, inst.lo.clone(), inst.hi.clone()).map_err(|e| e.to_string())?;
    let fast = project_tangent_box(&inst.g, &set, tol).map_err(|e| e.to_string())?;
    let slow = brute_force_projection(&inst.g, &inst.jacobian, &inst.lo, &inst.hi).map_err(|e| e.to_string())?;
    let plain = (&fast.point - &slow).amax();

    let neg = -&inst.trust;
    let fast = project_tangent_two_boxes(&inst.g, &set, &neg, &inst.trust, tol).map_err(|e| e.to_string())?;
    let lo = inst.lo.zip_map(&neg, f64::max);
    let hi = inst.hi.zip_map(&inst.trust, f64::min);
    let slow = brute_force_projection(&inst.g, &inst.jacobian, &lo, &hi).map_err(|e| e.to_string())?;
    Ok(plain.max((&fast.point - &slow).amax()))
}

pub fn projection_equivalence(instances: usize, seed: u64) -> ProjectionCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch: Vec<ProjectionInstance> = (0..instances).map(|_| random_projection_instance(&mut rng)).collect();
    let results: Vec<Result<f64, String>> = batch
        .par_iter()
        .map(|inst| compare_with_oracle(inst, crate::projections::TOL_EQ))
        .collect();
    let mut check = ProjectionCheck {
        instances,
        ..Default::default()
    };
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(err) => {
                check.max_error = check.max_error.max(err);
                if !(err <= PROJECTION_MATCH_TOL) {
                    check.failures.push(format!("instance {i}: gap {err:.3e} to oracle"));
                }
            }
            Err(e) => check.failures.push(format!("instance {i}: {e}")),
        }
    }
    check
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepResult {
    pub runs: usize,
    pub report: LemmaReport,
    pub errors: Vec<String>,
}

impl SweepResult {
    /// Restricts the report to the inequalities selected by `keep`.
    pub fn filtered(&self, keep: impl Fn(Inequality) -> bool) -> LemmaReport {
        LemmaReport {
            checked: self.report.checked.iter().filter(|(k, _)| keep(**k)).map(|(k, v)| (*k, *v)).collect(),
            violations: self.report.violations.iter().filter(|v| keep(v.inequality)).cloned().collect(),
        }
    }
}

/// Solves every problem with every oracle and seed and checks each trace.
/// Runs are independent and merged in input order.
pub fn inequality_sweep(
    problems: &[Problem],
    models: &[NoiseModel],
    seeds: &[u64],
    config: &SolverConfig,
) -> SweepResult {
    let jobs: Vec<(&Problem, &NoiseModel, u64)> = problems
        .iter()
        .flat_map(|p| models.iter().flat_map(move |m| seeds.iter().map(move |&s| (p, m, s))))
        .collect();
    let outcomes: Vec<Result<LemmaReport, String>> = jobs
        .par_iter()
        .map(|&(problem, model, seed)| {
            let cfg = SolverConfig {
                seed,
                ..config.clone()
            };
            let tag = format!("{} / {} / seed {seed}", problem.name(), model.label());
            let out = solve(problem, &mut GradientOracle::new(model.clone(), seed), &cfg)
                .map_err(|e| format!("{tag}: {e}"))?;
            if let Some(e) = out.error {
                return Err(format!("{tag}: {e}"));
            }
            Ok(check_lemma_inequalities(&out.trace))
        })
        .collect();
    let mut result = SweepResult {
        runs: jobs.len(),
        ..Default::default()
    };
    for outcome in outcomes {
        match outcome {
            Ok(report) => result.report.merge(report),
            Err(e) => result.errors.push(e),
        }
    }
    result
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct NoiseCheck {
    pub checks: usize,
    pub failures: Vec<String>,
}

/// Exact oracles show no error, the Ω_T gap grows with the Gaussian noise
/// level, and the step-proportional oracle honours its directional constant.
pub fn noise_checks(seed: u64) -> NoiseCheck {
    let mut check = NoiseCheck::default();
    let registry = Registry::default();
    let run = |problem: &Problem, model: &NoiseModel, iterations: usize| {
        let cfg = SolverConfig {
            seed,
            ..fixed_length_config(iterations)
        };
        solve(problem, &mut GradientOracle::new(model.clone(), seed), &cfg)
            .map(|out| noise_condition_monitor(&out.trace, model))
            .map_err(|e| format!("{} / {}: {e}", problem.name(), model.label()))
    };
    for problem in registry.iter() {
        check.checks += 1;
        match run(problem, &NoiseModel::Exact, 500) {
            Ok(r) if r.mean_error_along_step == 0.0 && r.kappa_omega == 0.0 && r.gradient_error_ratio == 0.0 => {}
            Ok(r) => check.failures.push(format!("{}: exact oracle reports error {r:?}", problem.name())),
            Err(e) => check.failures.push(e),
        }

        check.checks += 1;
        let mut kappas = Vec::new();
        for sigma in [1e-3, 1e-2, 1e-1] {
            match run(problem, &NoiseModel::AdditiveGaussian { sigma }, 2000) {
                Ok(r) => kappas.push(r.kappa_omega),
                Err(e) => check.failures.push(e),
            }
        }
        if kappas.len() == 3 && !kappas.windows(2).all(|w| w[0] < w[1]) {
            check
                .failures
                .push(format!("{}: Ω_T gap not increasing in σ: {kappas:?}", problem.name()));
        }
    }

    check.checks += 1;
    let kappa = 0.1;
    let sphere = registry.get("sphere-linear").expect("registered");
    match run(&sphere, &NoiseModel::StepProportional { kappa_dir2: kappa }, 12_000) {
        Ok(r) if r.tangential_iterations < 10_000 => check.failures.push(format!(
            "step_proportional: only {} tangential iterations",
            r.tangential_iterations
        )),
        Ok(r) if !(r.kappa_dir <= 1.2 * kappa) => check.failures.push(format!(
            "step_proportional: measured κ_dir {:.4} exceeds 1.2 × {kappa}",
            r.kappa_dir
        )),
        Ok(_) => {}
        Err(e) => check.failures.push(e),
    }
    check
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionOutcome {
    pub section: SuiteSection,
    pub checks: usize,
    pub failures: Vec<String>,
    pub lemmas: Option<LemmaReport>,
}

impl SectionOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.lemmas.as_ref().is_none_or(|r| r.is_clean())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub sections: Vec<SectionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.sections.iter().all(SectionOutcome::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sections {
            let verdict = if s.passed() { "ok" } else { "FAILED" };
            writeln!(f, "[{}] {} ({} checks)", verdict, s.section.label(), s.checks)?;
            if let Some(report) = &s.lemmas {
                if !report.is_clean() {
                    write!(f, "{report}")?;
                }
            }
            for failure in s.failures.iter().take(20) {
                writeln!(f, "  {failure}")?;
            }
            if s.failures.len() > 20 {
                writeln!(f, "  ... {} more", s.failures.len() - 20)?;
            }
        }
        Ok(())
    }
}

pub fn run_suite(options: &SuiteOptions) -> SuiteReport {
    let wants = |s: SuiteSection| options.sections.contains(&s);
    let mut sections = Vec::new();

    if wants(SuiteSection::Projections) {
        let check = projection_equivalence(options.projection_instances, options.instance_seed);
        sections.push(SectionOutcome {
            section: SuiteSection::Projections,
            checks: check.instances,
            failures: check.failures,
            lemmas: None,
        });
    }

    if wants(SuiteSection::Lemmas) || wants(SuiteSection::Adagrad) {
        let problems: Vec<Problem> = Registry::default().iter().cloned().collect();
        let config = SolverConfig {
            fault_alpha_scale: options.fault_alpha_scale,
            ..fixed_length_config(options.iterations)
        };
        let sweep = inequality_sweep(&problems, &sweep_noise_models(), &options.seeds, &config);
        for (section, adagrad) in [(SuiteSection::Lemmas, false), (SuiteSection::Adagrad, true)] {
            if !wants(section) {
                continue;
            }
            let report = sweep.filtered(|i| is_adagrad_inequality(i) == adagrad);
            sections.push(SectionOutcome {
                section,
                checks: report.checked.values().sum(),
                failures: sweep.errors.clone(),
                lemmas: Some(report),
            });
        }
    }

    if wants(SuiteSection::Noise) {
        let check = noise_checks(options.instance_seed);
        sections.push(SectionOutcome {
            section: SuiteSection::Noise,
            checks: check.checks,
            failures: check.failures,
            lemmas: None,
        });
    }
    SuiteReport { sections }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_names_round_trip() {
        for s in SuiteSection::ALL {
            assert_eq!(s.label().parse::<SuiteSection>().unwrap(), s);
        }
        assert!("everything".parse::<SuiteSection>().is_err());
    }

    #[test]
    fn random_instances_respect_shape_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let inst = random_projection_instance(&mut rng);
            let n = inst.g.len();
            assert!(n <= 6 && inst.jacobian.nrows() <= 2 && inst.jacobian.nrows() < n.max(1));
            assert!(inst.lo.iter().all(|&l| l <= 0.0) && inst.hi.iter().all(|&h| h >= 0.0));
        }
    }

    #[test]
    fn filter_runs_only_projections() {
        let report = run_suite(&SuiteOptions {
            sections: vec![SuiteSection::Projections],
            projection_instances: 50,
            ..Default::default()
        });
        assert_eq!(report.sections.len(), 1);
        assert_eq!(report.sections[0].section, SuiteSection::Projections);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn shrunken_stepsizes_break_the_lower_sum() {
        let report = run_suite(&SuiteOptions {
            sections: vec![SuiteSection::Adagrad],
            seeds: vec![0],
            iterations: 300,
            fault_alpha_scale: Some(1e-3),
            ..Default::default()
        });
        let lemmas = report.sections[0].lemmas.as_ref().unwrap();
        assert!(lemmas.count(Inequality::AdagradLowerSum) > 0);
        assert!(!report.passed());
    }
}
