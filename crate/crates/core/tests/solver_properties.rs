use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stradic::diagnostics::compute_measures_at;
use stradic::problem::{GradientOracle, NoiseModel, Registry};
use stradic::solver::{solve, Branch, SolverConfig};
use stradic::steps::StepSizeState;
use stradic::verify::fixed_length_config;

proptest! {
    #[test]
    fn larger_accumulator_gives_smaller_stepsize(
        gamma in prop::collection::vec(0.0f64..10.0, 4),
        extra in prop::collection::vec(1e-3f64..5.0, 4),
        d in prop::collection::vec(-3.0f64..3.0, 4),
        eta in 0.05f64..1.0,
        varsigma in 0.05f64..1.0,
    ) {
        let gamma = DVector::from_vec(gamma);
        let d = DVector::from_vec(d);
        let mut small = StepSizeState::new(4, eta, varsigma);
        small.accumulate_gamma(&gamma.map(f64::sqrt));
        let mut large = small.clone();
        large.accumulate_gamma(&DVector::from_vec(extra).map(f64::sqrt));
        small.update_stepsizes(&d);
        large.update_stepsizes(&d);
        for i in 0..4 {
            prop_assert!(large.alpha()[i] < small.alpha()[i]);
            prop_assert!(small.alpha()[i] * d[i].abs() < 1.0);
        }
    }
}

#[test]
fn accumulator_and_theta_match_independent_recount() {
    let registry = Registry::default();
    for problem in registry.iter() {
        let config = SolverConfig {
            varsigma: 0.5,
            ..fixed_length_config(400)
        };
        let out = solve(problem, &mut GradientOracle::new(NoiseModel::AdditiveGaussian { sigma: 1e-2 }, 4), &config).unwrap();
        let mut gamma = DVector::zeros(problem.dim());
        for r in &out.trace.records {
            assert!((&r.gamma - &gamma).amax() <= 1e-12 * gamma.amax().max(1.0), "{} k={}", problem.name(), r.k);
            if r.branch == Branch::Tangential {
                gamma += r.d.component_mul(&r.d);
            }
        }
        assert!((&out.trace.final_gamma - &gamma).amax() <= 1e-12 * gamma.amax().max(1.0));
        let theta = 1.0 + gamma.max() / config.varsigma;
        let reported = out.measures.expect("measures at max_iter").theta;
        assert!((reported - theta).abs() <= 1e-12 * theta, "{}: {reported} vs {theta}", problem.name());
    }
}

#[test]
fn every_iteration_is_in_exactly_one_branch() {
    for problem in Registry::default().iter() {
        let out = solve(problem, &mut GradientOracle::new(NoiseModel::Exact, 0), &fixed_length_config(500)).unwrap();
        for r in &out.trace.records {
            assert_eq!(r.branch == Branch::Tangential, r.tangential.is_some());
            if r.branch == Branch::NormalOnly {
                assert!(r.normal.is_some(), "{} k={}: normal-only without a normal step", problem.name(), r.k);
            }
        }
    }
}

#[test]
fn constraint_norm_drops_on_normal_steps() {
    for problem in Registry::default().iter() {
        let config = fixed_length_config(2000);
        let out = solve(problem, &mut GradientOracle::new(NoiseModel::Exact, 0), &config).unwrap();
        let xi = out
            .trace
            .records
            .iter()
            .filter(|r| r.c_norm > 0.0)
            .map(|r| r.omega_n / r.c_norm)
            .fold(f64::INFINITY, f64::min);
        for r in out.trace.records.iter().filter(|r| r.normal.is_some()) {
            let lhs = r.c_norm_plus - r.c_norm;
            let rhs = -(config.kappa_n * xi / 2.0) * r.omega_n;
            assert!(lhs <= rhs + 1e-8 * r.c_norm.max(1e-300), "{} k={}: {lhs:e} > {rhs:e}", problem.name(), r.k);
        }
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let problem = Registry::default().get("rosenbrock-circle").unwrap();
    let model = NoiseModel::StepProportional { kappa_dir2: 0.1 };
    let run = || {
        let out = solve(&problem, &mut GradientOracle::new(model.clone(), 17), &fixed_length_config(300)).unwrap();
        out.trace.records.iter().map(|r| (r.x.clone(), r.g.clone(), r.branch)).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn true_measure_is_locally_lipschitz_away_from_bounds() {
    let registry = Registry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for problem in registry.iter() {
        let mut oracle = GradientOracle::new(NoiseModel::Exact, 0);
        let mut probes = 0;
        while probes < 40 {
            let x = DVector::from_fn(problem.dim(), |i, _| {
                let lo = problem.lower()[i].max(-3.0);
                let hi = problem.upper()[i].min(3.0);
                rng.random_range(lo..=hi)
            });
            // Keep the activity pattern fixed: stay clear of every bound.
            let clearance = (&x - problem.lower()).min().min((problem.upper() - &x).min());
            if clearance < 1e-3 {
                continue;
            }
            let Ok(base) = compute_measures_at(problem, &mut oracle, &x, 1.0, 1e-12) else { continue };
            let h = DVector::from_fn(problem.dim(), |_, _| rng.random_range(-1.0..1.0)).normalize() * 1e-6;
            let moved = compute_measures_at(problem, &mut oracle, &(&x + &h), 1.0, 1e-12).unwrap();
            let gap = (moved.omega_t_true.unwrap() - base.omega_t_true.unwrap()).abs();
            assert!(gap <= 1e3 * h.norm(), "{}: |ΔΩ_T| = {gap:e} at {x:?}", problem.name());
            probes += 1;
        }
    }
}
