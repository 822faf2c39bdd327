use std::path::Path;
use std::process::{Command, Output};

use stradic::{solve, GradientOracle, NoiseModel, Registry, SolverConfig};
use stradic_cli::output::{trace_rows, SEED_FIELDS, SUMMARY_FIELDS, TRACE_COLUMNS};
use stradic_cli::RunSpec;

fn stradic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stradic")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn read_trace(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn solve_reaches_tolerance_on_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = stradic(&[
        "solve", "--problem", "sphere-linear", "--eta", "0.5", "--eps-d", "1e-6", "--eps-c", "1e-6", "--seed", "7",
        "--output", out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let (header, rows) = read_trace(&dir.path().join("trace_seed7.csv"));
    assert_eq!(header, TRACE_COLUMNS);
    let last = rows.last().unwrap();
    assert_eq!(last[1], "terminal");
    assert!(last[2].parse::<f64>().unwrap() <= 1e-6);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        assert!(!row[8].is_empty(), "psi is defined for this problem");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = summary.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = SUMMARY_FIELDS.to_vec();
    expected.sort_unstable();
    assert_eq!(keys, expected);
    let seed = &summary["seeds"][0];
    let mut seed_keys: Vec<&str> = seed.as_object().unwrap().keys().map(String::as_str).collect();
    seed_keys.sort_unstable();
    let mut expected = SEED_FIELDS.to_vec();
    expected.sort_unstable();
    assert_eq!(seed_keys, expected);
    assert_eq!(summary["status"], "converged");
    assert!(seed["distance_to_solution"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn unknown_problem_lists_registry() {
    let out = stradic(&["solve", "--problem", "nosuch"]);
    assert_eq!(code(&out), 4);
    let err = text(&out.stderr);
    for name in Registry::default().names() {
        assert!(err.contains(&name), "{err}");
    }
}

#[test]
fn invalid_beta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stradic(&["solve", "--beta", "1.5", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(text(&out.stderr).contains("beta"));
}

#[test]
fn iteration_limit_gives_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = stradic(&["solve", "--problem", "rosenbrock-circle", "--max-iter", "5", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let (_, rows) = read_trace(&dir.path().join("trace_seed0.csv"));
    assert_eq!(rows.len(), 6);
}

#[test]
fn oracle_parameters_must_match_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = stradic(&["solve", "--oracle", "gaussian", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let out = stradic(&["solve", "--sigma", "0.1", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn spec_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &spec_path,
        format!(
            r#"{{"problem": "separable-quadratic", "oracle": "gaussian", "sigma": 0.01, "seeds": [1, 2], "eta": 0.5, "max_iter": 50, "output": {:?}}}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = stradic(&["solve", "--spec", spec_path.to_str().unwrap(), "--eta", "0.25"]);
    assert!(matches!(code(&out), 0 | 2), "{}", text(&out.stderr));
    let resolved = RunSpec::load(&out_dir.join("runspec.json")).unwrap();
    assert_eq!(resolved.problem, "separable-quadratic");
    assert_eq!(resolved.config.eta, 0.25);
    assert_eq!(resolved.config.max_iter, 50);
    assert_eq!(resolved.seeds, vec![1, 2]);
    assert_eq!(resolved.oracle, NoiseModel::AdditiveGaussian { sigma: 0.01 });
    assert!(out_dir.join("trace_seed1.csv").exists() && out_dir.join("trace_seed2.csv").exists());
}

#[test]
fn trace_floats_read_back_bit_for_bit() {
    let problem = Registry::default().get("rosenbrock-circle").unwrap();
    let config = SolverConfig {
        max_iter: 200,
        ..SolverConfig::default()
    };
    let out = solve(&problem, &mut GradientOracle::new(NoiseModel::AdditiveGaussian { sigma: 0.1 }, 3), &config).unwrap();
    let rows = trace_rows(&problem, &out, None).unwrap();
    for (row, r) in rows.iter().zip(&out.trace.records) {
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), r.omega_t().to_bits());
        assert_eq!(row[3].parse::<f64>().unwrap().to_bits(), r.omega_n.to_bits());
        assert_eq!(row[4].parse::<f64>().unwrap().to_bits(), r.c_norm.to_bits());
        assert_eq!(row[6].parse::<f64>().unwrap().to_bits(), r.alpha.min().to_bits());
        assert!(row[8].is_empty());
    }
}

#[test]
fn verify_filter_runs_only_projections() {
    let out = stradic(&["verify", "--filter", "projections", "--instances", "200"]);
    assert_eq!(code(&out), 0);
    let stdout = text(&out.stdout);
    assert!(stdout.contains("[ok] projections"));
    for other in ["lemmas", "adagrad", "noise"] {
        assert!(!stdout.contains(&format!("] {other}")), "{stdout}");
    }
}

#[test]
fn verify_reports_injected_stepsize_fault() {
    let out = stradic(&[
        "verify", "--filter", "adagrad", "--seeds", "0", "--iterations", "300", "--fault-alpha-scale", "1e-3",
    ]);
    assert_ne!(code(&out), 0);
    let stdout = text(&out.stdout);
    let row = stdout.lines().find(|l| l.starts_with("adagrad_lower_sum")).expect("table row");
    let violated: usize = row.split_whitespace().last().unwrap().parse().unwrap();
    assert!(violated > 0, "{stdout}");
}

#[test]
fn verify_rejects_unknown_section() {
    assert_eq!(code(&stradic(&["verify", "--filter", "everything"])), 3);
}

#[test]
fn rate_prints_slope_and_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("curve.csv");
    let out = stradic(&[
        "rate", "--problem", "sphere-linear", "--hessian", "exact", "--max-iter", "10000", "--output",
        dir.path().to_str().unwrap(), "--csv", csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("slope "))
        .expect("slope line")
        .parse()
        .unwrap();
    assert!(slope <= -0.4, "{stdout}");
    let (header, rows) = read_trace(&csv_path);
    assert_eq!(header, ["k", "average"]);
    assert_eq!(rows.len(), 10_000);
}

#[test]
fn short_rate_trace_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stradic(&["rate", "--max-iter", "50", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    // With the stopping test active the run ends long before 100 iterations.
    let out = stradic(&[
        "rate", "--problem", "sphere-linear", "--allow-early-stop", "--output", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn list_problems_names_every_entry() {
    let out = stradic(&["list-problems"]);
    assert_eq!(code(&out), 0);
    let stdout = text(&out.stdout);
    for name in Registry::default().names() {
        assert!(stdout.contains(&name));
    }
}
