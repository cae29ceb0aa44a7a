//! The two-stepsize federated method with random reshuffling, and baselines.
//!
//! One round from `x_t`:
//!
//! 1. sample a cohort `S_t` of `C` clients uniformly;
//! 2. every `m ∈ S_t` runs one pass over its `n` samples in permuted order
//!    with client stepsize `γ`, ending at `x^n_{t,m}`;
//! 3. each reports `g_{t,m} = (x_t − x^n_{t,m}) / (γn)`, the average of the
//!    gradients it evaluated along the pass;
//! 4. the server steps `x_{t+1} = x_t − γ̃ g_t` with `g_t` the cohort mean.
//!
//! With `γ̃ = γn` this is FedAvg with random reshuffling; `γ̃ > γn`
//! extrapolates past the averaged endpoint and `γ̃ < γn` pulls back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{ClientDataset, FederatedProblem, Vector};
use crate::sampling::{sample_cohort, sample_permutation, CohortSample, Permutation, RngStream, StreamPurpose};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleMode {
    /// One permutation per client, reused in every round.
    ShuffleOnce,
    /// A fresh permutation per client and round.
    #[default]
    RandomReshuffling,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// `γ > 0`.
    pub client_step: f64,
    /// `γ̃ ≥ 0`.
    pub server_step: f64,
    pub cohort_size: usize,
    pub rounds: usize,
    pub mode: ShuffleMode,
    pub seed: u64,
    pub x0: Vector,
    /// Keep every iterate in [`RunResult::iterates`].
    pub record_iterates: bool,
}

impl RunConfig {
    pub fn new(client_step: f64, server_step: f64, cohort_size: usize, rounds: usize, x0: Vector) -> Self {
        Self {
            client_step,
            server_step,
            cohort_size,
            rounds,
            mode: ShuffleMode::default(),
            seed: 0,
            x0,
            record_iterates: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: ShuffleMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    /// Interpolation coefficient `α = γ̃/(γn)`.
    pub fn alpha(&self, n: usize) -> f64 {
        self.server_step / (self.client_step * n as f64)
    }

    /// Extrapolation coefficient `β = γ̃/(γn) − 1`.
    pub fn beta(&self, n: usize) -> f64 {
        self.alpha(n) - 1.0
    }

    pub fn validate(&self, problem: &FederatedProblem) -> Result<()> {
        if !(self.client_step > 0.0 && self.client_step.is_finite()) {
            return Err(Error::input(format!("client stepsize must be > 0, got {}", self.client_step)));
        }
        if !(self.server_step >= 0.0 && self.server_step.is_finite()) {
            return Err(Error::input(format!("server stepsize must be >= 0, got {}", self.server_step)));
        }
        if self.cohort_size == 0 || self.cohort_size > problem.num_clients() {
            return Err(Error::input(format!(
                "cohort size {} must lie in [1, {}]",
                self.cohort_size,
                problem.num_clients()
            )));
        }
        if self.rounds == 0 {
            return Err(Error::input("horizon T must be >= 1"));
        }
        problem.check_dim(&self.x0)?;
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("x0 has non-finite entries"));
        }
        Ok(())
    }
}

/// Scalars recorded at `x_t`.
///
/// `g_norm_sq` and `cohort` describe the step that produced `x_t`; both are
/// empty/zero at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub f_val: f64,
    pub grad_norm_sq: f64,
    pub dist_sq: Option<f64>,
    pub g_norm_sq: f64,
    pub cohort: CohortSample,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// `T + 1` entries unless the run diverged.
    pub traces: Vec<RoundTrace>,
    pub final_x: Vector,
    pub diverged: bool,
    pub iterates: Option<Vec<Vector>>,
    /// Total sample-gradient evaluations.
    pub grad_evals: u64,
}

#[derive(Clone, Debug)]
pub struct LocalPass {
    pub x_end: Vector,
    /// `(1/n) Σ_i ∇f^{π^i}(x^i)`, accumulated along the pass.
    pub g: Vector,
    pub grad_evals: usize,
}

/// Runs incremental gradient steps over `order` starting from `x_t`.
pub fn local_pass(
    client: &ClientDataset,
    x_t: &Vector,
    gamma: f64,
    order: impl IntoIterator<Item = usize>,
) -> Result<LocalPass> {
    let d = x_t.len();
    let mut x = x_t.clone();
    let mut acc = Vector::zeros(d);
    let mut grad = Vector::zeros(d);
    let mut steps = 0usize;
    for i in order {
        client.samples()[i].grad_into(&x, &mut grad);
        acc += &grad;
        x.axpy(-gamma, &grad, 1.0);
        steps += 1;
    }
    if steps == 0 {
        return Err(Error::input("local pass needs at least one step"));
    }
    if x.iter().chain(acc.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Diverged { round: 0 });
    }
    Ok(LocalPass { x_end: x, g: acc / steps as f64, grad_evals: steps })
}

/// One random-reshuffling pass: each sample exactly once, in `pi` order.
pub fn local_pass_rr(client: &ClientDataset, x_t: &Vector, gamma: f64, pi: &Permutation) -> Result<LocalPass> {
    if !(gamma > 0.0) {
        return Err(Error::input("client stepsize must be > 0"));
    }
    if pi.len() != client.len() {
        return Err(Error::input(format!("permutation of length {} for {} samples", pi.len(), client.len())));
    }
    local_pass(client, x_t, gamma, pi.as_slice().iter().copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LocalSampling {
    Shuffled,
    WithReplacement,
}

/// Everything one server round produced.
#[derive(Clone, Debug)]
pub struct RoundOutput {
    pub x_next: Vector,
    /// Aggregated direction `g_t`.
    pub g: Vector,
    pub cohort: CohortSample,
    /// Local endpoints `x^n_{t,m}` in cohort order.
    pub x_ends: Vec<Vector>,
    pub grad_evals: usize,
}

/// Permutation client `m` uses in round `t`.
pub fn client_permutation(cfg: &RunConfig, n: usize, round: usize, client: usize) -> Result<Permutation> {
    let stream_round = match cfg.mode {
        ShuffleMode::ShuffleOnce => 0,
        ShuffleMode::RandomReshuffling => round as u64,
    };
    let mut rng = RngStream::derive(cfg.seed, stream_round, Some(client), StreamPurpose::Permutation);
    sample_permutation(n, &mut rng)
}

pub fn round_cohort(cfg: &RunConfig, clients: usize, round: usize) -> Result<CohortSample> {
    let mut rng = RngStream::derive(cfg.seed, round as u64, None, StreamPurpose::Cohort);
    sample_cohort(clients, cfg.cohort_size, &mut rng)
}

fn federated_round(
    problem: &FederatedProblem,
    x_t: &Vector,
    cfg: &RunConfig,
    round: usize,
    sampling: LocalSampling,
) -> Result<RoundOutput> {
    problem.check_dim(x_t)?;
    let n = problem.samples_per_client();
    let cohort = round_cohort(cfg, problem.num_clients(), round)?;
    let mut g = Vector::zeros(x_t.len());
    let mut x_ends = Vec::with_capacity(cohort.len());
    let mut grad_evals = 0;
    for &m in cohort.members() {
        let client = &problem.clients()[m];
        let pass = match sampling {
            LocalSampling::Shuffled => {
                let pi = client_permutation(cfg, n, round, m)?;
                local_pass_rr(client, x_t, cfg.client_step, &pi)
            }
            LocalSampling::WithReplacement => {
                let mut rng = RngStream::derive(cfg.seed, round as u64, Some(m), StreamPurpose::LocalIndex);
                local_pass(client, x_t, cfg.client_step, (0..n).map(|_| rng.below(n)))
            }
        }
        .map_err(|e| match e {
            Error::Diverged { .. } => Error::Diverged { round },
            other => other,
        })?;
        g += &pass.g;
        grad_evals += pass.grad_evals;
        x_ends.push(pass.x_end);
    }
    g /= cohort.len() as f64;
    let mut x_next = x_t.clone();
    x_next.axpy(-cfg.server_step, &g, 1.0);
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { round });
    }
    Ok(RoundOutput { x_next, g, cohort, x_ends, grad_evals })
}

/// One round of the two-stepsize method from `x_t`.
pub fn nastya_round(problem: &FederatedProblem, x_t: &Vector, cfg: &RunConfig, round: usize) -> Result<RoundOutput> {
    federated_round(problem, x_t, cfg, round, LocalSampling::Shuffled)
}

/// `(1/C) Σ_m (x^n_m + β (x^n_m − x_t))`.
pub fn extrapolation_update(x_t: &Vector, x_ends: &[Vector], beta: f64) -> Vector {
    let mut acc = Vector::zeros(x_t.len());
    for x_end in x_ends {
        acc += x_end + (x_end - x_t) * beta;
    }
    acc / x_ends.len() as f64
}

/// `(1 − α) x_t + α (1/C) Σ_m x^n_m`.
pub fn interpolation_update(x_t: &Vector, x_ends: &[Vector], alpha: f64) -> Vector {
    let mut mean = Vector::zeros(x_t.len());
    for x_end in x_ends {
        mean += x_end;
    }
    mean /= x_ends.len() as f64;
    x_t * (1.0 - alpha) + mean * alpha
}

fn observe(problem: &FederatedProblem, x: &Vector, round: usize, g_norm_sq: f64, cohort: CohortSample) -> Option<RoundTrace> {
    let f_val = problem.eval_f(x).ok()?;
    let grad_norm_sq = problem.grad_f(x).ok()?.norm_squared();
    let dist_sq = problem.optimum().map(|xs| (x - xs).norm_squared());
    let finite = f_val.is_finite() && grad_norm_sq.is_finite() && dist_sq.is_none_or(f64::is_finite);
    finite.then_some(RoundTrace { round, f_val, grad_norm_sq, dist_sq, g_norm_sq, cohort })
}

fn run_rounds(
    problem: &FederatedProblem,
    x0: &Vector,
    rounds: usize,
    record_iterates: bool,
    mut step: impl FnMut(&Vector, usize) -> Result<RoundOutput>,
) -> Result<RunResult> {
    let mut iterates = record_iterates.then(|| vec![x0.clone()]);
    let Some(first) = observe(problem, x0, 0, 0.0, CohortSample::default()) else {
        return Ok(RunResult { traces: vec![], final_x: x0.clone(), diverged: true, iterates, grad_evals: 0 });
    };
    let mut traces = Vec::with_capacity(rounds + 1);
    traces.push(first);
    let mut x = x0.clone();
    let mut grad_evals = 0u64;
    for t in 0..rounds {
        let out = match step(&x, t) {
            Ok(out) => out,
            Err(Error::Diverged { .. }) => {
                return Ok(RunResult { traces, final_x: x, diverged: true, iterates, grad_evals });
            }
            Err(e) => return Err(e),
        };
        grad_evals += out.grad_evals as u64;
        let Some(trace) = observe(problem, &out.x_next, t + 1, out.g.norm_squared(), out.cohort) else {
            return Ok(RunResult { traces, final_x: x, diverged: true, iterates, grad_evals });
        };
        traces.push(trace);
        x = out.x_next;
        if let Some(its) = iterates.as_mut() {
            its.push(x.clone());
        }
    }
    Ok(RunResult { traces, final_x: x, diverged: false, iterates, grad_evals })
}

/// `T` rounds of [`nastya_round`] from `cfg.x0`.
pub fn run_nastya(problem: &FederatedProblem, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate(problem)?;
    run_rounds(problem, &cfg.x0, cfg.rounds, cfg.record_iterates, |x, t| nastya_round(problem, x, cfg, t))
}

/// Local SGD baseline: like [`run_nastya`] but each local step draws its
/// sample index uniformly with replacement.
pub fn run_local_sgd_wr(problem: &FederatedProblem, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate(problem)?;
    run_rounds(problem, &cfg.x0, cfg.rounds, cfg.record_iterates, |x, t| {
        federated_round(problem, x, cfg, t, LocalSampling::WithReplacement)
    })
}

/// Full-gradient descent `x_{t+1} = x_t − step ∇f(x_t)`.
pub fn run_gd(problem: &FederatedProblem, step: f64, rounds: usize, x0: &Vector) -> Result<RunResult> {
    run_gd_with(problem, step, rounds, x0, false)
}

pub fn run_gd_with(
    problem: &FederatedProblem,
    step: f64,
    rounds: usize,
    x0: &Vector,
    record_iterates: bool,
) -> Result<RunResult> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::input(format!("GD step must be > 0, got {step}")));
    }
    problem.check_dim(x0)?;
    let evals_per_step = problem.num_clients() * problem.samples_per_client();
    let everyone = CohortSample::full(problem.num_clients());
    run_rounds(problem, x0, rounds, record_iterates, |x, t| {
        let g = problem.grad_f(x)?;
        let mut x_next = x.clone();
        x_next.axpy(-step, &g, 1.0);
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { round: t });
        }
        Ok(RoundOutput { x_next, g, cohort: everyone.clone(), x_ends: vec![], grad_evals: evals_per_step })
    })
}
