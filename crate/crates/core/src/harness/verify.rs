//! Self-checks against independent oracles and the convergence bounds.
//!
//! Each check runs a fixed, seeded experiment and reports pass/fail with a
//! one-line detail. Suites group related checks; `All` runs every one.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::experiment::{run_experiment_on, summary_columns, RunOptions, TRACE_COLUMNS};
use super::spec::{Algorithm, ExperimentSpec, LogregSource, ProblemSpec};
use super::sweep::{run_sweep_on, SweepAxis};
use crate::engine::{
    client_permutation, extrapolation_update, interpolation_update, nastya_round, run_gd, run_nastya, RunConfig,
    ShuffleMode,
};
use crate::error::{Error, Result};
use crate::problems::{make_quadratic_problem, ClientDataset, ConvexityClass, FederatedProblem, SampleLoss, Vector};
use crate::sampling::{population_variance, swr_formula, swr_moments_oracle, RngStream, StreamPurpose};
use crate::theory::Theorem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Equivalence,
    Gradients,
    BoundsSc,
    BoundsCvx,
    BoundsNcvx,
    SmallAlpha,
    Speedup,
    Outputs,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 10] = [
        "lemma1",
        "equivalence",
        "gradients",
        "bounds_sc",
        "bounds_cvx",
        "bounds_ncvx",
        "small_alpha",
        "speedup",
        "outputs",
        "all",
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        use Suite::*;
        let all = [Lemma1, Equivalence, Gradients, BoundsSc, BoundsCvx, BoundsNcvx, SmallAlpha, Speedup, Outputs, All];
        Self::NAMES.iter().position(|n| *n == name).map(|i| all[i])
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({:.2}s): {}", self.name, self.elapsed.as_secs_f64(), self.detail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs `body`, timing it; an `Err` becomes a failed check.
fn timed(name: &'static str, budget: Option<Duration>, body: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let res = body();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match res {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail = format!("{detail}; over the {:.0}s budget", b.as_secs_f64());
        }
    }
    CheckOutcome { name, passed, detail, elapsed }
}

pub fn verify(suite: Suite) -> VerifyReport {
    let checks: Vec<fn() -> CheckOutcome> = match suite {
        Suite::Lemma1 => vec![check_subsample_variance],
        Suite::Equivalence => vec![check_update_forms, check_gd_reduction, check_fedavg_reduction],
        Suite::Gradients => vec![check_finite_differences, check_estimator_consistency],
        Suite::BoundsSc => vec![check_sc_bound],
        Suite::BoundsCvx => vec![check_cvx_bound],
        Suite::BoundsNcvx => vec![check_ncvx_bound],
        Suite::SmallAlpha => vec![check_small_alpha],
        Suite::Speedup => vec![check_single_client_speedup],
        Suite::Outputs => vec![check_determinism],
        Suite::All => vec![
            check_subsample_variance,
            check_update_forms,
            check_gd_reduction,
            check_fedavg_reduction,
            check_finite_differences,
            check_estimator_consistency,
            check_sc_bound,
            check_cvx_bound,
            check_ncvx_bound,
            check_small_alpha,
            check_single_client_speedup,
            check_determinism,
        ],
    };
    VerifyReport { checks: checks.into_iter().map(|c| c()).collect() }
}

fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

fn gaussian(rng: &mut RngStream, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.standard_normal())
}

/// Sampling without replacement: the closed-form variance of a `k`-subset
/// mean against full enumeration, 200 random sets, every `k`.
pub fn check_subsample_variance() -> CheckOutcome {
    timed("subsample_variance", Some(Duration::from_secs(5)), || {
        let mut rng = RngStream::derive(0x1e44a, 0, None, StreamPurpose::Problem);
        let (mut worst_var, mut worst_mean) = (0.0f64, 0.0f64);
        let mut comparisons = 0;
        for _ in 0..200 {
            let n = 1 + rng.below(7);
            let d = 1 + rng.below(3);
            let scale = 10f64.powf(4.0 * rng.next_f64() - 2.0);
            let xs: Vec<Vector> = (0..n).map(|_| gaussian(&mut rng, d, scale)).collect();
            let sigma = population_variance(&xs);
            let mean = xs.iter().fold(Vector::zeros(d), |acc, x| acc + x) / n as f64;
            for k in 1..=n {
                let oracle = swr_moments_oracle(&xs, k)?;
                let formula = swr_formula(sigma, n, k)?;
                let err = (oracle.variance - formula).abs();
                let rel = if formula > 0.0 { err / formula } else { err / sigma.max(f64::MIN_POSITIVE) };
                worst_var = worst_var.max(if sigma > 0.0 || formula > 0.0 { rel } else { err });
                worst_mean = worst_mean.max((&oracle.mean - &mean).norm() / mean.norm().max(1.0));
                comparisons += 1;
            }
        }
        let ok = worst_var <= 1e-10 && worst_mean <= 1e-12;
        Ok((ok, format!("{comparisons} (n,k) pairs; max variance rel err {worst_var:.2e}, max mean err {worst_mean:.2e}")))
    })
}

/// A random small problem of one of three families.
fn random_problem(rng: &mut RngStream, family: usize) -> Result<FederatedProblem> {
    let m = 1 + rng.below(5);
    let n = 1 + rng.below(6);
    let d = 1 + rng.below(4);
    let seed = rng.below(1 << 20) as u64;
    match family % 3 {
        0 => make_quadratic_problem(m, n, d, 0.1, 2.0, 1.0, seed),
        1 => {
            let mut l = 0.0f64;
            let clients = (0..m)
                .map(|_| {
                    let losses = (0..n)
                        .map(|_| {
                            let label = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
                            let s = SampleLoss::logistic(gaussian(rng, d, 1.0), label, 0.05)?;
                            l = l.max(s.smoothness().unwrap_or(0.0));
                            Ok(s)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    ClientDataset::new(losses)
                })
                .collect::<Result<Vec<_>>>()?;
            FederatedProblem::new(clients, l, 0.05, ConvexityClass::StronglyConvex)
        }
        _ => {
            let mut l = 0.0f64;
            let clients = (0..m)
                .map(|_| {
                    let losses = (0..n)
                        .map(|_| {
                            let s = SampleLoss::rational(gaussian(rng, d, 1.0), 2.0 * rng.standard_normal())?;
                            l = l.max(s.smoothness().unwrap_or(0.0));
                            Ok(s)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    ClientDataset::new(losses)
                })
                .collect::<Result<Vec<_>>>()?;
            FederatedProblem::new(clients, l.max(1e-12), 0.0, ConvexityClass::Nonconvex)
        }
    }
}

/// The server step, the extrapolation form and the interpolation form give
/// the same next iterate.
pub fn check_update_forms() -> CheckOutcome {
    timed("update_forms", Some(Duration::from_secs(5)), || {
        let mut rng = RngStream::derive(0xf0a5, 0, None, StreamPurpose::Problem);
        let mut worst = 0.0f64;
        for i in 0..50 {
            let problem = random_problem(&mut rng, i)?;
            let (n, l) = (problem.samples_per_client(), problem.smoothness());
            let gamma = (0.05 + 0.95 * rng.next_f64()) / (n as f64 * l);
            let alpha = 0.1 + 4.9 * rng.next_f64();
            let cohort = 1 + rng.below(problem.num_clients());
            let x = gaussian(&mut rng, problem.dim(), 1.0);
            let cfg = RunConfig::new(gamma, alpha * gamma * n as f64, cohort, 1, x.clone()).with_seed(i as u64);
            let out = nastya_round(&problem, &x, &cfg, rng.below(5))?;
            let ext = extrapolation_update(&x, &out.x_ends, cfg.beta(n));
            let int = interpolation_update(&x, &out.x_ends, cfg.alpha(n));
            worst = worst.max(rel_diff(&out.x_next, &ext)).max(rel_diff(&out.x_next, &int)).max(rel_diff(&ext, &int));
        }
        Ok((worst <= 1e-12, format!("50 instances, max pairwise rel diff {worst:.2e}")))
    })
}

/// One client holding one sample with `γ̃ = γ` is full-gradient descent,
/// bit for bit.
pub fn check_gd_reduction() -> CheckOutcome {
    timed("gd_reduction", None, || {
        let mut mismatches = vec![];
        let quad = make_quadratic_problem(1, 1, 3, 0.1, 1.0, 0.0, 11)?;
        let logit = FederatedProblem::new(
            vec![ClientDataset::new(vec![SampleLoss::logistic(Vector::from_vec(vec![1.0, -2.0, 0.5]), 1.0, 0.1)?])?],
            0.25 * 5.25 + 0.1,
            0.1,
            ConvexityClass::StronglyConvex,
        )?;
        for (name, problem) in [("quadratic", quad), ("logistic", logit)] {
            let step = 0.5 / problem.smoothness();
            let x0 = Vector::from_element(3, 1.0);
            let cfg = RunConfig::new(step, step, 1, 100, x0.clone()).with_seed(5);
            let a = run_nastya(&problem, &cfg)?;
            let b = run_gd(&problem, step, 100, &x0)?;
            let same = a.traces == b.traces && a.final_x == b.final_x && a.traces.len() == 101;
            if !same {
                mismatches.push(name);
            }
        }
        Ok((mismatches.is_empty(), if mismatches.is_empty() {
            "M = n = 1 traces equal GD bitwise over 100 rounds".into()
        } else {
            format!("traces differ for {mismatches:?}")
        }))
    })
}

/// `γ̃ = γn` with full participation against a separately coded FedAvg with
/// random reshuffling on the same permutations.
pub fn check_fedavg_reduction() -> CheckOutcome {
    timed("fedavg_reduction", None, || {
        let problem = make_quadratic_problem(5, 4, 3, 0.1, 1.0, 1.0, 17)?;
        let (m, n) = (problem.num_clients(), problem.samples_per_client());
        let gamma = 0.05;
        let rounds = 50;
        let x0 = Vector::from_element(3, 2.0);
        let cfg = RunConfig::new(gamma, gamma * n as f64, m, rounds, x0.clone()).with_seed(7).recording_iterates();
        let run = run_nastya(&problem, &cfg)?;
        let iterates = run.iterates.as_ref().expect("recorded");
        let mut x = x0;
        let mut worst = 0.0f64;
        for t in 0..rounds {
            let mut acc = Vector::zeros(x.len());
            for (c, client) in problem.clients().iter().enumerate() {
                let pi = client_permutation(&cfg, n, t, c)?;
                let mut y = x.clone();
                for &i in pi.as_slice() {
                    let g = client.samples()[i].grad(&y);
                    y -= gamma * g;
                }
                acc += y;
            }
            x = acc / m as f64;
            worst = worst.max(rel_diff(&x, &iterates[t + 1]));
        }
        Ok((worst <= 1e-12, format!("{rounds} rounds, max per-round rel diff {worst:.2e}")))
    })
}

/// Analytic gradients of every loss family and of `f` against central
/// differences.
pub fn check_finite_differences() -> CheckOutcome {
    timed("finite_differences", None, || {
        let mut rng = RngStream::derive(0xfd, 0, None, StreamPurpose::Problem);
        let mut worst = 0.0f64;
        for i in 0..30 {
            let problem = random_problem(&mut rng, i)?;
            let x = gaussian(&mut rng, problem.dim(), 1.0);
            let g = problem.grad_f(&x)?;
            let h = 1e-6;
            for j in 0..problem.dim() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (problem.eval_f(&xp)? - problem.eval_f(&xm)?) / (2.0 * h);
                worst = worst.max((fd - g[j]).abs() / g.norm().max(1.0));
            }
        }
        Ok((worst <= 1e-6, format!("30 problems, max rel err {worst:.2e}")))
    })
}

/// `‖g_t − ∇f(x_t)‖` shrinks linearly in `γ` under full participation.
pub fn check_estimator_consistency() -> CheckOutcome {
    timed("estimator_consistency", None, || {
        let problem = make_quadratic_problem(4, 8, 5, 0.1, 1.0, 1.0, 23)?;
        let (n, l) = (problem.samples_per_client() as f64, problem.smoothness());
        let mut rng = RngStream::derive(23, 0, None, StreamPurpose::Problem);
        let x = gaussian(&mut rng, problem.dim(), 3.0);
        let full = problem.grad_f(&x)?;
        let mut pts = vec![];
        for k in 4..=12 {
            let gamma = 2f64.powi(-k) / (n * l);
            let cfg = RunConfig::new(gamma, gamma * n, problem.num_clients(), 1, x.clone()).with_seed(3);
            let out = nastya_round(&problem, &x, &cfg, 0)?;
            pts.push((gamma.ln(), (&out.g - &full).norm().ln()));
        }
        let slope = ls_slope(&pts);
        Ok(((slope - 1.0).abs() <= 0.2, format!("log-log slope {slope:.3} over k = 4..12")))
    })
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn base_spec(problem: ProblemSpec, client_step: f64, server_step: f64, cohort: usize, rounds: usize, bounds: Vec<Theorem>) -> ExperimentSpec {
    ExperimentSpec {
        problem,
        algorithm: Algorithm::Nastya,
        client_step,
        server_step,
        cohort,
        rounds,
        mode: ShuffleMode::RandomReshuffling,
        seed: 0,
        ensemble: 100,
        bounds,
        output: "verify".into(),
        x0: None,
    }
}

fn describe_check(summary: &super::experiment::ExperimentSummary, theorem: Theorem, rounds: &[usize]) -> (bool, String) {
    let Some(c) = summary.check(theorem) else {
        return (false, "bound was not computed".into());
    };
    let Some(curve) = &c.bound else {
        return (false, format!("no bound: {}", c.error.clone().unwrap_or_default()));
    };
    let ok = rounds.iter().all(|&t| c.holds_at(t));
    let worst = rounds
        .iter()
        .filter(|&&t| c.observed.mean[t].is_finite())
        .map(|&t| (c.observed.mean[t] - 2.0 * c.observed.se[t]) / curve.values[t])
        .fold(f64::NEG_INFINITY, f64::max);
    let detail = format!(
        "{} violations over {} checked rounds; max (mean - 2SE)/bound {worst:.3e}; floor {:.3e}",
        rounds.iter().filter(|&&t| !c.holds_at(t)).count(),
        rounds.len(),
        curve.floor()
    );
    (ok, detail)
}

/// Strongly convex bound on a heterogeneous quadratic with `κ = 100`.
pub fn check_sc_bound() -> CheckOutcome {
    timed("bound_sc", Some(Duration::from_secs(120)), || {
        let problem_spec = ProblemSpec::Quadratic {
            clients: 10,
            samples: 8,
            dim: 5,
            mu: 0.01,
            smoothness: 1.0,
            heterogeneity: 1.0,
            seed: 1,
        };
        let problem = problem_spec.build()?;
        let server = 1.0 / (16.0 * problem.smoothness());
        let spec = base_spec(problem_spec, server / 80.0, server, 5, 300, vec![Theorem::StronglyConvex]);
        let out = run_experiment_on(&problem, &spec, &RunOptions::default())?;
        let rounds: Vec<usize> = (0..=300).collect();
        Ok(describe_check(&out.summary, Theorem::StronglyConvex, &rounds))
    })
}

/// Convex bound on unregularized synthetic logistic regression.
pub fn check_cvx_bound() -> CheckOutcome {
    timed("bound_cvx", None, || {
        let problem_spec = ProblemSpec::Logreg {
            source: LogregSource::Synthetic { samples: 8, dim: 5 },
            clients: 10,
            lambda: 0.0,
            seed: 3,
            reference_iters: 1_000_000,
        };
        let problem = problem_spec.build()?;
        if problem.optimal_value_tol() > 1e-9 {
            return Ok((false, "reference descent did not converge (data may be separable)".into()));
        }
        let server = 1.0 / (16.0 * problem.smoothness());
        let spec = base_spec(problem_spec, server / 80.0, server, 5, 200, vec![Theorem::Convex]);
        let out = run_experiment_on(&problem, &spec, &RunOptions::default())?;
        Ok(describe_check(&out.summary, Theorem::Convex, &[50, 100, 200]))
    })
}

/// Nonconvex bound for half and full participation.
pub fn check_ncvx_bound() -> CheckOutcome {
    timed("bound_ncvx", None, || {
        let problem_spec = ProblemSpec::Nonconvex { clients: 8, samples: 8, dim: 4, seed: 5 };
        let problem = problem_spec.build()?;
        let l = problem.smoothness();
        let (gamma, server) = (1.0 / (2.0 * 8.0 * l) / 4.0, 1.0 / (4.0 * l) / 4.0);
        let mut all_ok = true;
        let mut details = vec![];
        for cohort in [4, 8] {
            let spec = base_spec(problem_spec.clone(), gamma, server, cohort, 200, vec![Theorem::Nonconvex]);
            let out = run_experiment_on(&problem, &spec, &RunOptions::default())?;
            let (ok, detail) = describe_check(&out.summary, Theorem::Nonconvex, &[200]);
            all_ok &= ok;
            details.push(format!("C = {cohort}: {detail}"));
        }
        Ok((all_ok, details.join(" | ")))
    })
}

pub const SMALL_ALPHA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// With one client per round, some `α < 1` beats `α = 1` at steady state and
/// every `α < 1` stays under its bound.
pub fn check_small_alpha() -> CheckOutcome {
    timed("small_alpha", None, || {
        let problem_spec = ProblemSpec::Quadratic {
            clients: 10,
            samples: 8,
            dim: 5,
            mu: 0.1,
            smoothness: 1.0,
            heterogeneity: 2.0,
            seed: 9,
        };
        let problem = problem_spec.build()?;
        let gamma = 1.0 / (2.0 * problem.smoothness());
        let rounds = 600;
        let window = 100;
        let spec = base_spec(problem_spec, gamma, gamma * 8.0, 1, rounds, vec![Theorem::SmallAlpha]);
        let sweep = run_sweep_on(&problem, &spec, SweepAxis::Alpha, &SMALL_ALPHA_GRID, &RunOptions::default())?;
        let mut steady = vec![];
        let mut bound_ok = true;
        let mut bound_notes = vec![];
        for p in &sweep.points {
            let s = p.outcome.as_ref().map_err(|e| Error::Config(e.clone()))?;
            let d = s.dist_sq.as_ref().expect("quadratic optimum known");
            let tail = &d.mean[rounds + 1 - window..];
            steady.push(tail.iter().sum::<f64>() / window as f64);
            if p.value < 1.0 {
                let c = s.check(Theorem::SmallAlpha).expect("requested");
                if !c.satisfied() {
                    bound_ok = false;
                    bound_notes.push(format!("α = {}: {:?} {} violations", p.value, c.error, c.violations.len()));
                }
            }
        }
        let at_one = *steady.last().expect("grid ends at 1");
        let (best_idx, best) = steady[..steady.len() - 1]
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let ok = best < at_one && bound_ok;
        let mut detail = format!(
            "steady-state E|x - x*|^2: best α = {} gives {best:.3e} vs {at_one:.3e} at α = 1",
            SMALL_ALPHA_GRID[best_idx]
        );
        if !bound_notes.is_empty() {
            detail.push_str(&format!("; bound: {}", bound_notes.join(", ")));
        }
        Ok((ok, detail))
    })
}

/// Epochs until `f(x_t) − f* ≤ target`, at most `cap`.
fn epochs_to_reach(problem: &FederatedProblem, cfg: &RunConfig, f_star: f64, target: f64, cap: usize) -> Result<Option<usize>> {
    let mut x = cfg.x0.clone();
    if problem.eval_f(&x)? - f_star <= target {
        return Ok(Some(0));
    }
    for t in 0..cap {
        x = nastya_round(problem, &x, cfg, t)?.x_next;
        if problem.eval_f(&x)? - f_star <= target {
            return Ok(Some(t + 1));
        }
    }
    Ok(None)
}

/// With one client, a large server step with a tiny client step reaches
/// `f − f* ≤ 1e-6` in fewer epochs than plain random reshuffling with the
/// same client step.
pub fn check_single_client_speedup() -> CheckOutcome {
    timed("single_client_speedup", None, || {
        let problem_spec = ProblemSpec::Logreg {
            source: LogregSource::Synthetic { samples: 32, dim: 5 },
            clients: 1,
            lambda: 0.5,
            seed: 31,
            reference_iters: 1_000_000,
        };
        let problem = problem_spec.build()?;
        let f_star = problem.optimal_value().expect("reference optimum attached");
        let (n, l) = (problem.samples_per_client() as f64, problem.smoothness());
        let server = 1.0 / (16.0 * l);
        let gamma = server / n / 10.0;
        let target = 1e-6;
        let cap = 200_000;
        let x0 = Vector::zeros(problem.dim());
        let mut wins = 0;
        let mut needed = vec![];
        for seed in 0..20u64 {
            let two = RunConfig::new(gamma, server, 1, cap, x0.clone()).with_seed(seed);
            let Some(k) = epochs_to_reach(&problem, &two, f_star, target, cap)? else {
                continue;
            };
            needed.push(k);
            let plain = RunConfig::new(gamma, gamma * n, 1, k, x0.clone()).with_seed(seed);
            if epochs_to_reach(&problem, &plain, f_star, target, k)?.is_none() {
                wins += 1;
            }
        }
        let range = match (needed.iter().min(), needed.iter().max()) {
            (Some(a), Some(b)) => format!("{a}..{b} epochs"),
            _ => "never".into(),
        };
        Ok((wins == 20, format!("two-stepsize run reached 1e-6 in {range}, strictly faster on {wins}/20 seeds")))
    })
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Result<Self> {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static COUNTER: AtomicUsize = AtomicUsize::new(0);
        let path = std::env::temp_dir().join(format!(
            "nastya-verify-{tag}-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&path)?;
        Ok(TempDir(path))
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Checks the header and numeric cells of a written CSV file.
pub fn check_csv_file(path: &Path, header: &[String]) -> std::result::Result<(), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let got: Vec<&str> = lines.next().ok_or("empty file")?.split(',').collect();
    if got != header.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("{}: header {got:?} != {header:?}", path.display()));
    }
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("{}: row {} has {} cells", path.display(), i + 2, cells.len()));
        }
        if let Some(bad) = cells.iter().find(|c| c.parse::<f64>().is_err()) {
            return Err(format!("{}: row {} cell `{bad}` is not numeric", path.display(), i + 2));
        }
    }
    Ok(())
}

/// Two runs with different thread counts write byte-identical files that
/// match the CSV schema.
pub fn check_determinism() -> CheckOutcome {
    timed("outputs", None, || {
        let problem_spec = ProblemSpec::Quadratic {
            clients: 6,
            samples: 4,
            dim: 3,
            mu: 0.1,
            smoothness: 1.0,
            heterogeneity: 1.0,
            seed: 2,
        };
        let problem = problem_spec.build()?;
        let mut spec = base_spec(problem_spec, 0.01, 0.05, 3, 30, vec![Theorem::StronglyConvex, Theorem::Nonconvex]);
        spec.ensemble = 8;
        let dirs = [TempDir::new("a")?, TempDir::new("b")?];
        let mut outputs = vec![];
        for (dir, threads) in dirs.iter().zip([1, 4]) {
            let opts = RunOptions { out_dir: Some(dir.0.clone()), threads };
            outputs.push(run_experiment_on(&problem, &spec, &opts)?.files);
        }
        for (a, b) in outputs[0].iter().zip(&outputs[1]) {
            if std::fs::read(a)? != std::fs::read(b)? {
                return Ok((false, format!("{} differs between thread counts", a.display())));
            }
        }
        let trace_header: Vec<String> = TRACE_COLUMNS.iter().map(|s| s.to_string()).collect();
        for f in &outputs[0] {
            let name = f.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let res = if name.ends_with("_summary.csv") {
                check_csv_file(f, &summary_columns(&spec.bounds))
            } else if name.ends_with(".csv") {
                check_csv_file(f, &trace_header)
            } else {
                Ok(())
            };
            if let Err(msg) = res {
                return Ok((false, msg));
            }
        }
        Ok((true, format!("{} files identical across 1 and 4 threads; schema ok", outputs[0].len())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_roundtrip() {
        for name in Suite::NAMES {
            assert!(Suite::from_name(name).is_some());
        }
        assert_eq!(Suite::from_name("bounds_sc"), Some(Suite::BoundsSc));
        assert!(Suite::from_name("everything").is_none());
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((ls_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fast_checks_pass() {
        for c in [check_subsample_variance(), check_update_forms(), check_gd_reduction(), check_fedavg_reduction()] {
            assert!(c.passed, "{c}");
        }
    }
}
