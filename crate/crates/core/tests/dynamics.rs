//! Behaviour of the simulator over many rounds and seeds.

use nastya_core::engine::{nastya_round, run_gd, run_local_sgd_wr, run_nastya};
use nastya_core::harness::verify::ls_slope;
use nastya_core::harness::{run_experiment_on, run_sweep_on, ExperimentSpec, ProblemSpec, RunOptions, SweepAxis};
use nastya_core::problems::{make_quadratic_problem, solve_quadratic_optimum, FederatedProblem, Vector};
use nastya_core::theory::{bound_sc, HeterogeneityStats, StatsOptions};
use nastya_core::{RunConfig, ShuffleMode, Theorem};

fn heterogeneous() -> FederatedProblem {
    make_quadratic_problem(8, 5, 3, 0.1, 1.0, 2.0, 77).unwrap()
}

fn steady_dist(problem: &FederatedProblem, cfg: &RunConfig, seeds: u64, window: usize) -> f64 {
    let mut total = 0.0;
    for s in 0..seeds {
        let run = run_nastya(problem, &cfg.clone().with_seed(s)).unwrap();
        let tail = &run.traces[run.traces.len() - window..];
        total += tail.iter().map(|t| t.dist_sq.unwrap()).sum::<f64>() / window as f64;
    }
    total / seeds as f64
}

#[test]
fn each_participant_evaluates_n_gradients_per_round() {
    let p = heterogeneous();
    let cfg = RunConfig::new(0.01, 0.05, 3, 7, Vector::zeros(3));
    let out = nastya_round(&p, &cfg.x0, &cfg, 0).unwrap();
    assert_eq!(out.grad_evals, 3 * 5);
    assert_eq!(run_nastya(&p, &cfg).unwrap().grad_evals, 7 * 3 * 5);
}

#[test]
fn more_participants_means_less_noise() {
    let p = heterogeneous();
    let m = p.num_clients();
    let base = RunConfig::new(0.02, 0.1, 1, 300, Vector::zeros(3));
    let errs: Vec<f64> = [1, m / 2, m]
        .iter()
        .map(|&c| steady_dist(&p, &RunConfig { cohort_size: c, ..base.clone() }, 40, 100))
        .collect();
    assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
}

#[test]
fn reshuffling_beats_sampling_with_replacement() {
    let p = heterogeneous();
    let n = p.samples_per_client() as f64;
    let gamma = 0.1;
    let base = RunConfig::new(gamma, gamma * n, p.num_clients(), 200, Vector::zeros(3));
    let (mut rr, mut wr) = (0.0, 0.0);
    for s in 0..100 {
        let cfg = base.clone().with_seed(s);
        rr += run_nastya(&p, &cfg).unwrap().traces.last().unwrap().dist_sq.unwrap();
        wr += run_local_sgd_wr(&p, &cfg).unwrap().traces.last().unwrap().dist_sq.unwrap();
    }
    assert!(wr >= rr, "with replacement {wr} < reshuffling {rr}");
}

#[test]
fn homogeneous_single_sample_clients_ignore_the_cohort() {
    let p = make_quadratic_problem(6, 1, 3, 0.1, 1.0, 0.0, 5).unwrap();
    let full = RunConfig::new(0.2, 0.2, 6, 50, Vector::from_element(3, 1.0));
    let a = run_nastya(&p, &full).unwrap();
    for c in [1, 3] {
        let b = run_nastya(&p, &RunConfig { cohort_size: c, ..full.clone() }).unwrap();
        assert!((&a.final_x - &b.final_x).norm() <= 1e-14 * a.final_x.norm().max(1.0));
    }
}

/// On a homogeneous quadratic each local pass is an affine map with the same
/// law on every client, so `E[x_T]` does not depend on the cohort size.
#[test]
fn homogeneous_partial_participation_matches_full_in_expectation() {
    let p = make_quadratic_problem(6, 4, 3, 0.1, 1.0, 0.0, 5).unwrap();
    let full = RunConfig::new(0.2, 0.8, 6, 20, Vector::from_element(3, 1.0));
    let finals = |c: usize| -> Vec<Vector> {
        (0..400).map(|s| run_nastya(&p, &RunConfig { cohort_size: c, ..full.clone() }.with_seed(s)).unwrap().final_x).collect()
    };
    let (a, b) = (finals(6), finals(2));
    for j in 0..3 {
        let col = |xs: &[Vector]| xs.iter().map(|x| x[j]).collect::<Vec<_>>();
        let (ma, sa) = nastya_core::harness::experiment::mean_se(&col(&a));
        let (mb, sb) = nastya_core::harness::experiment::mean_se(&col(&b));
        assert!((ma - mb).abs() <= 4.0 * (sa * sa + sb * sb).sqrt() + 1e-12, "coordinate {j}: {ma} vs {mb}");
    }
}

#[test]
fn strongly_convex_descent_reaches_the_floor() {
    let p = make_quadratic_problem(6, 5, 4, 0.05, 1.0, 1.0, 12).unwrap();
    let l = p.smoothness();
    let server = 1.0 / (16.0 * l);
    let cfg = RunConfig::new(server / 500.0, server, 6, 500, Vector::zeros(4));
    let run = run_nastya(&p, &cfg).unwrap();
    let stats = HeterogeneityStats::of(&p, StatsOptions { dissimilarity: false, ..Default::default() }).unwrap();
    let d0 = run.traces[0].dist_sq.unwrap();
    let curve = bound_sc(&stats, p.strong_convexity(), l, &cfg, d0).unwrap();
    for (t, tr) in run.traces.iter().enumerate() {
        assert!(tr.dist_sq.unwrap() <= curve.values[t], "round {t}");
    }
}

#[test]
fn estimator_error_is_linear_in_the_client_step() {
    let p = heterogeneous();
    let (n, l) = (p.samples_per_client() as f64, p.smoothness());
    let x = Vector::from_vec(vec![3.0, -1.0, 2.0]);
    let full = p.grad_f(&x).unwrap();
    let pts: Vec<(f64, f64)> = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
        .iter()
        .map(|c| {
            let gamma = c / (n * l);
            let cfg = RunConfig::new(gamma, gamma * n, p.num_clients(), 1, x.clone()).with_seed(9);
            let g = nastya_round(&p, &x, &cfg, 0).unwrap().g;
            (gamma.ln(), (g - &full).norm().ln())
        })
        .collect();
    let slope = ls_slope(&pts);
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

/// With `C = M` and `γ → 0` at fixed `γ̃`, the trajectory approaches GD with
/// step `γ̃`, at first order in `γ`.
#[test]
fn small_client_steps_approach_gradient_descent() {
    let p = heterogeneous();
    let server = 0.05;
    let x0 = Vector::from_element(3, 2.0);
    let gd = run_gd(&p, server, 30, &x0).unwrap().final_x;
    let pts: Vec<(f64, f64)> = (6..=10)
        .map(|k| {
            let gamma = 2f64.powi(-k);
            let cfg = RunConfig::new(gamma, server, p.num_clients(), 30, x0.clone()).with_seed(1);
            (gamma.ln(), (run_nastya(&p, &cfg).unwrap().final_x - &gd).norm().ln())
        })
        .collect();
    let slope = ls_slope(&pts);
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn quadratic_optimum_agrees_with_long_descent() {
    let p = make_quadratic_problem(3, 3, 2, 0.2, 1.0, 1.0, 3).unwrap();
    let closed = solve_quadratic_optimum(&p).unwrap();
    let gd = run_gd(&p, 1.0 / p.smoothness(), 100_000, &Vector::zeros(2)).unwrap().final_x;
    assert!((closed - gd).norm() <= 1e-8);
}

#[test]
fn shuffle_once_and_reshuffling_differ_but_both_converge() {
    let p = heterogeneous();
    let cfg = RunConfig::new(0.01, 0.05, 8, 400, Vector::zeros(3)).with_seed(4);
    let rr = run_nastya(&p, &cfg).unwrap();
    let so = run_nastya(&p, &cfg.clone().with_mode(ShuffleMode::ShuffleOnce)).unwrap();
    assert_ne!(rr.final_x, so.final_x);
    for run in [rr, so] {
        assert!(run.traces.last().unwrap().dist_sq.unwrap() < 1e-2 * run.traces[0].dist_sq.unwrap());
    }
}

fn spec_for(problem: ProblemSpec, cohort: usize) -> ExperimentSpec {
    ExperimentSpec {
        problem,
        algorithm: nastya_core::harness::Algorithm::Nastya,
        client_step: 0.02,
        server_step: 0.1,
        cohort,
        rounds: 200,
        mode: ShuffleMode::RandomReshuffling,
        seed: 0,
        ensemble: 30,
        bounds: vec![],
        output: "t".into(),
        x0: None,
    }
}

#[test]
fn cohort_sweep_is_non_increasing_in_cohort_size() {
    let problem_spec =
        ProblemSpec::Quadratic { clients: 8, samples: 5, dim: 3, mu: 0.1, smoothness: 1.0, heterogeneity: 2.0, seed: 77 };
    let problem = problem_spec.build().unwrap();
    let spec = spec_for(problem_spec, 8);
    let sweep = run_sweep_on(&problem, &spec, SweepAxis::Cohort, &[1.0, 4.0, 8.0], &RunOptions::default()).unwrap();
    let steady: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| {
            let d = p.outcome.as_ref().unwrap().dist_sq.as_ref().unwrap();
            d.mean[150..].iter().sum::<f64>() / 51.0
        })
        .collect();
    assert!(steady.windows(2).all(|w| w[1] <= w[0]), "{steady:?}");
}

#[test]
fn diverging_seeds_are_counted() {
    let problem_spec =
        ProblemSpec::Quadratic { clients: 4, samples: 3, dim: 2, mu: 0.5, smoothness: 1.0, heterogeneity: 1.0, seed: 1 };
    let problem = problem_spec.build().unwrap();
    let mut spec = spec_for(problem_spec, 4);
    spec.server_step = 50.0;
    spec.ensemble = 3;
    spec.bounds = vec![Theorem::StronglyConvex];
    let out = run_experiment_on(&problem, &spec, &RunOptions::default()).unwrap();
    assert_eq!(out.summary.diverged, 3);
    assert!(out.summary.check(Theorem::StronglyConvex).unwrap().error.is_some());
}
