use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use stradic::diagnostics::{mean_curve, rate_fit_series, running_average, MIN_RATE_LEN};
use stradic::{run_suite, solve, GradientOracle, Problem, ProblemError, Registry, SolverConfig, Status, SuiteOptions, SuiteSection};

use crate::output::{estimated_rho, fmt_float, trace_rows, write_csv, SeedSummary, Summary, TRACE_COLUMNS};
use crate::spec::{parse_hessian, OracleParts, RunSpec};
use crate::{CliError, RateArgs, RunArgs, VerifyArgs, EXIT_ERROR, EXIT_MAX_ITER, EXIT_OK, EXIT_VIOLATIONS};

/// Run spec from `--spec` (or defaults) with every given flag applied on top.
pub fn resolve_spec(args: &RunArgs) -> Result<RunSpec, CliError> {
    let mut spec = match &args.spec {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    if let Some(p) = &args.problem {
        spec.problem = p.clone();
    }
    if let Some(d) = &args.data {
        spec.data = Some(d.clone());
    }
    if let Some(s) = &args.seeds {
        spec.seeds = s.clone();
    }
    if let Some(o) = &args.output {
        spec.output = o.clone();
    }

    let touches_oracle = args.oracle.is_some()
        || args.sigma.is_some()
        || args.kappa_dir2.is_some()
        || args.batch_size.is_some()
        || args.coefficients.is_some();
    if touches_oracle {
        let mut parts = OracleParts::of(&spec.oracle);
        if let Some(mode) = &args.oracle {
            if *mode != parts.mode {
                parts = OracleParts {
                    mode: mode.clone(),
                    ..OracleParts::default()
                };
            }
        }
        parts.sigma = args.sigma.or(parts.sigma);
        parts.kappa_dir2 = args.kappa_dir2.or(parts.kappa_dir2);
        parts.batch_size = args.batch_size.or(parts.batch_size);
        parts.coefficients = args.coefficients.clone().or(parts.coefficients);
        spec.oracle = parts.build()?;
    }

    let c = &mut spec.config;
    let floats = [
        (args.theta_n, &mut c.theta_n),
        (args.theta_t, &mut c.theta_t),
        (args.beta, &mut c.beta),
        (args.eta, &mut c.eta),
        (args.varsigma, &mut c.varsigma),
        (args.tau, &mut c.tau),
        (args.kappa_n, &mut c.kappa_n),
        (args.eps_d, &mut c.eps_d),
        (args.eps_c, &mut c.eps_c),
    ];
    for (flag, field) in floats {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(m) = args.max_iter {
        c.max_iter = m;
    }
    if let Some(h) = &args.hessian {
        c.hessian = parse_hessian(h)?;
    }
    if let Some(r) = args.refine {
        c.refine = r;
    }
    Ok(spec)
}

pub fn load_problem(spec: &RunSpec) -> Result<Problem, CliError> {
    let registry = Registry::default();
    let problem = registry.get(&spec.problem).map_err(|e| match e {
        ProblemError::UnknownProblem { name, available } => CliError::UnknownProblem { name, available },
        other => CliError::Invalid(other.to_string()),
    })?;
    match &spec.data {
        None => Ok(problem),
        Some(path) if spec.problem == "lsq-simplex" => {
            Registry::lsq_simplex_from_csv(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
        }
        Some(_) => Err(CliError::Invalid(format!("`data` applies only to lsq-simplex, not {}", spec.problem))),
    }
}

fn prepare(args: &RunArgs, adjust: impl FnOnce(&mut RunSpec)) -> Result<(RunSpec, Problem), CliError> {
    let mut spec = resolve_spec(args)?;
    adjust(&mut spec);
    spec.validate()?;
    let problem = load_problem(&spec)?;
    if let Some(path) = &args.write_spec {
        std::fs::write(path, spec.to_json())?;
    }
    std::fs::create_dir_all(&spec.output)?;
    std::fs::write(spec.output.join("runspec.json"), spec.to_json())?;
    Ok((spec, problem))
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Solves once per seed, in parallel; each seed writes its own trace file.
pub fn cmd_solve(args: &RunArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (spec, problem) = prepare(args, |_| {})?;
    let runs: Vec<Result<SeedSummary, CliError>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let config = SolverConfig {
                seed,
                ..spec.config.clone()
            };
            let mut oracle = GradientOracle::new(spec.oracle.clone(), seed);
            let out = solve(&problem, &mut oracle, &config).map_err(|e| CliError::Invalid(e.to_string()))?;
            let rho = estimated_rho(&problem, &out.trace, seed)?;
            let rows = trace_rows(&problem, &out, rho)?;
            let file = trace_file_name(seed);
            write_csv(&spec.output.join(&file), &TRACE_COLUMNS, &rows)?;
            Ok(SeedSummary::new(&problem, seed, &out, file))
        })
        .collect();
    let seeds = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let failed = seeds.iter().find(|s| s.status != Status::Converged.label() && s.status != Status::MaxIter.label());
    let status = match failed {
        Some(s) => s.status.clone(),
        None if seeds.iter().all(|s| s.status == Status::Converged.label()) => Status::Converged.label().into(),
        None => Status::MaxIter.label().into(),
    };
    for s in &seeds {
        println!(
            "seed {}: {} after {} iterations, ‖d‖ = {}, ‖c‖ = {}",
            s.seed,
            s.status,
            s.iterations,
            s.norm_d.map_or("-".into(), |v| format!("{v:.3e}")),
            s.c_norm.map_or("-".into(), |v| format!("{v:.3e}")),
        );
        if let Some(e) = &s.error {
            eprintln!("seed {}: {e}", s.seed);
        }
    }
    let summary = Summary {
        status: status.clone(),
        spec: serde_json::from_str(&spec.to_json()).expect("canonical spec is JSON"),
        seeds,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("plain data");
    std::fs::write(spec.output.join("summary.json"), text)?;
    Ok(if status == Status::Converged.label() {
        EXIT_OK
    } else if status == Status::MaxIter.label() {
        EXIT_MAX_ITER
    } else {
        EXIT_ERROR
    })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let sections = if args.filter.is_empty() {
        SuiteSection::ALL.to_vec()
    } else {
        args.filter
            .iter()
            .map(|s| s.parse::<SuiteSection>().map_err(CliError::Invalid))
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(scale) = args.fault_alpha_scale {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CliError::Invalid(format!("fault_alpha_scale must be finite and > 0, got {scale}")));
        }
    }
    let options = SuiteOptions {
        sections,
        seeds: args.seeds.clone(),
        iterations: args.iterations,
        projection_instances: args.instances,
        instance_seed: args.instance_seed,
        fault_alpha_scale: args.fault_alpha_scale,
    };
    let start = Instant::now();
    let report = run_suite(&options);
    print!("{report}");
    println!("elapsed {:.2} s", start.elapsed().as_secs_f64());
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report).expect("plain data"))?;
    }
    if report.passed() {
        println!("all checks passed");
        Ok(EXIT_OK)
    } else {
        println!("violations found");
        Ok(EXIT_VIOLATIONS)
    }
}

/// Mean over seeds of `‖d_k‖ + ‖c_k‖`, truncated to the shortest run.
pub fn mean_optimality_series(spec: &RunSpec, problem: &Problem) -> Result<Vec<f64>, CliError> {
    let runs: Vec<Result<Vec<f64>, CliError>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let config = SolverConfig {
                seed,
                ..spec.config.clone()
            };
            let mut oracle = GradientOracle::new(spec.oracle.clone(), seed);
            let out = solve(problem, &mut oracle, &config).map_err(|e| CliError::Invalid(e.to_string()))?;
            if let Some(e) = &out.error {
                log::warn!("seed {seed} stopped early: {e}");
            }
            Ok(out.trace.optimality_series())
        })
        .collect();
    let series = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(mean_curve(&series))
}

pub fn cmd_rate(args: &RateArgs) -> Result<i32, CliError> {
    let (spec, problem) = prepare(&args.run, |spec| {
        if !args.allow_early_stop {
            spec.config.eps_d = f64::MIN_POSITIVE;
            spec.config.eps_c = f64::MIN_POSITIVE;
        }
    })?;
    if spec.config.max_iter < MIN_RATE_LEN {
        return Err(CliError::Invalid(format!(
            "max_iter {} gives a trace shorter than {MIN_RATE_LEN}",
            spec.config.max_iter
        )));
    }
    let mean = mean_optimality_series(&spec, &problem)?;
    let fit = rate_fit_series(&mean).map_err(|e| CliError::Invalid(e.to_string()))?;
    let averages = running_average(&mean);
    let path = args.csv.clone().unwrap_or_else(|| spec.output.join("rate.csv"));
    write_rate_csv(&path, &averages)?;
    println!("problem {} seeds {} iterations {}", spec.problem, spec.seeds.len(), mean.len());
    println!("slope {:.6}", fit.slope);
    println!("constant {:.6}", fit.constant);
    println!("final average {}", fmt_float(*averages.last().expect("length checked by the fit")));
    println!("csv {}", path.display());
    Ok(EXIT_OK)
}

fn write_rate_csv(path: &Path, averages: &[f64]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = averages
        .iter()
        .enumerate()
        .map(|(k, a)| vec![k.to_string(), fmt_float(*a)])
        .collect();
    write_csv(path, &["k", "average"], &rows)
}

pub fn cmd_list_problems() -> Result<i32, CliError> {
    for p in Registry::default().iter() {
        println!(
            "{:<22} n={} m={} objective={} finite_sum={} solution={}",
            p.name(),
            p.dim(),
            p.eq_count(),
            yes_no(p.has_objective()),
            yes_no(p.components().is_some()),
            yes_no(p.solution().is_some()),
        );
    }
    Ok(EXIT_OK)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
