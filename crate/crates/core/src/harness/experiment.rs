//! Seed ensembles, bound overlays, and CSV/JSON output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::spec::{Algorithm, ExperimentSpec};
use crate::engine::{run_gd_with, run_local_sgd_wr, run_nastya, RunConfig, RunResult};
use crate::error::{Error, Result};
use crate::problems::{FederatedProblem, Vector};
use crate::theory::{
    bound_cvx_curve, bound_ncvx_curve, bound_sc, bound_small_alpha, check_stepsizes, sigma_rad_upper_bound,
    BoundCurve, HeterogeneityStats, RegimeCheck, StatsOptions, Theorem,
};

/// Columns of every per-seed trace file.
pub const TRACE_COLUMNS: [&str; 6] = ["round", "seed", "f", "grad_norm_sq", "dist_sq", "g_norm_sq"];

/// Leading columns of every summary file; `bound_<name>` columns follow, then
/// the checked quantities of the convex and nonconvex bounds.
pub const SUMMARY_COLUMNS: [&str; 7] =
    ["round", "mean_f", "se_f", "mean_grad_norm_sq", "se_grad_norm_sq", "mean_dist_sq", "se_dist_sq"];

/// Full summary header for a list of requested bounds.
pub fn summary_columns(bounds: &[Theorem]) -> Vec<String> {
    let mut cols: Vec<String> = SUMMARY_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend(bounds.iter().map(|b| format!("bound_{}", b.name())));
    for b in bounds {
        if let Some(q) = checked_quantity(*b).filter(|q| *q != "dist_sq") {
            cols.push(format!("mean_{q}"));
            cols.push(format!("se_{q}"));
        }
    }
    cols
}

/// What each bound controls.
pub fn checked_quantity(theorem: Theorem) -> Option<&'static str> {
    Some(match theorem {
        Theorem::StronglyConvex | Theorem::SmallAlpha => "dist_sq",
        Theorem::Convex => "avg_iterate_gap",
        Theorem::Nonconvex => "min_grad_norm_sq",
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where CSV and JSON files go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the ensemble; 0 uses the global pool.
    pub threads: usize,
}

/// Ensemble mean and standard error per round.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Series {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Seeds still alive at each round.
    pub count: Vec<usize>,
}

impl Series {
    /// `rows[s][t]`, ragged when runs diverged early.
    pub fn from_rows(rows: &[Vec<f64>], len: usize) -> Self {
        let mut out = Series::default();
        for t in 0..len {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(t).copied()).collect();
            let (mean, se) = mean_se(&vals);
            out.mean.push(mean);
            out.se.push(se);
            out.count.push(vals.len());
        }
        out
    }
}

/// Sample mean and standard error (`s/√k`, zero for a single value).
pub fn mean_se(vals: &[f64]) -> (f64, f64) {
    let k = vals.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = vals.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Comparison of an ensemble quantity against a bound curve, `mean ≤ bound + 2·SE`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub theorem: Theorem,
    pub quantity: &'static str,
    pub bound: Option<BoundCurve>,
    /// Why no curve exists (regime violated, missing optimum, ...).
    pub error: Option<String>,
    pub observed: Series,
    /// Rounds where the check failed.
    pub violations: Vec<usize>,
}

impl BoundCheck {
    pub fn satisfied(&self) -> bool {
        self.bound.is_some() && self.violations.is_empty()
    }

    pub fn holds_at(&self, t: usize) -> bool {
        self.bound.is_some() && !self.violations.contains(&t)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub algorithm: &'static str,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub diverged: usize,
    pub f: Series,
    pub grad_norm_sq: Series,
    pub dist_sq: Option<Series>,
    pub checks: Vec<BoundCheck>,
    pub regime: Vec<RegimeCheck>,
    pub client_step: f64,
    pub server_step: f64,
    pub cohort: usize,
}

impl ExperimentSummary {
    pub fn check(&self, theorem: Theorem) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.theorem == theorem)
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    /// One per seed, in seed order.
    pub runs: Vec<RunResult>,
    pub files: Vec<PathBuf>,
}

pub fn run_config(spec: &ExperimentSpec, problem: &FederatedProblem) -> Result<RunConfig> {
    let x0 = match &spec.x0 {
        Some(v) => crate::problems::vector(v.clone())?,
        None => Vector::zeros(problem.dim()),
    };
    problem.check_dim(&x0)?;
    let mut cfg = RunConfig::new(spec.client_step, spec.server_step, spec.cohort, spec.rounds, x0)
        .with_mode(spec.mode)
        .with_seed(spec.seed);
    if spec.bounds.contains(&Theorem::Convex) {
        cfg = cfg.recording_iterates();
    }
    if spec.algorithm != Algorithm::Gd {
        cfg.validate(problem)?;
    }
    Ok(cfg)
}

fn run_one(problem: &FederatedProblem, spec: &ExperimentSpec, cfg: &RunConfig, seed: u64) -> Result<RunResult> {
    let cfg = cfg.clone().with_seed(seed);
    match spec.algorithm {
        Algorithm::Nastya => run_nastya(problem, &cfg),
        Algorithm::LocalSgdWr => run_local_sgd_wr(problem, &cfg),
        Algorithm::Gd => run_gd_with(problem, spec.server_step, spec.rounds, &cfg.x0, cfg.record_iterates),
    }
}

/// Runs `spec.ensemble` seeds `spec.seed, spec.seed + 1, …` and reduces them in
/// seed order, so the result does not depend on the thread count.
pub fn run_ensemble(problem: &FederatedProblem, spec: &ExperimentSpec, threads: usize) -> Result<Vec<RunResult>> {
    let cfg = run_config(spec, problem)?;
    let seeds: Vec<u64> = (0..spec.ensemble as u64).map(|i| spec.seed.wrapping_add(i)).collect();
    let work = || seeds.par_iter().map(|&s| run_one(problem, spec, &cfg, s)).collect::<Result<Vec<_>>>();
    if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(work)
    }
}

pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentOutcome> {
    let problem = spec.problem.build()?;
    run_experiment_on(&problem, spec, options)
}

/// Like [`run_experiment`] on an already built problem.
pub fn run_experiment_on(
    problem: &FederatedProblem,
    spec: &ExperimentSpec,
    options: &RunOptions,
) -> Result<ExperimentOutcome> {
    let runs = run_ensemble(problem, spec, options.threads)?;
    let summary = summarize(problem, spec, &runs)?;
    let files = match &options.out_dir {
        Some(dir) => write_outputs(dir, spec, &summary, &runs)?,
        None => vec![],
    };
    Ok(ExperimentOutcome { summary, runs, files })
}

fn bound_curve(problem: &FederatedProblem, cfg: &RunConfig, theorem: Theorem) -> Result<BoundCurve> {
    let x_star = problem
        .optimum()
        .ok_or_else(|| Error::Capability("x_star (minimizer of f) is not known".into()))?;
    let options = StatsOptions { dissimilarity: theorem == Theorem::Nonconvex, ..Default::default() };
    let stats = HeterogeneityStats::of(problem, options)?;
    let (l, mu) = (problem.smoothness(), problem.strong_convexity());
    let dist0 = (&cfg.x0 - x_star).norm_squared();
    match theorem {
        Theorem::StronglyConvex => bound_sc(&stats, mu, l, cfg, dist0),
        Theorem::Convex => bound_cvx_curve(&stats, l, cfg, dist0),
        Theorem::Nonconvex => {
            let f_star = problem.optimal_value().expect("optimum implies optimal value");
            bound_ncvx_curve(&stats, l, cfg, problem.eval_f(&cfg.x0)? - f_star)
        }
        Theorem::SmallAlpha => {
            let rad = sigma_rad_upper_bound(&stats, l, problem.samples_per_client(), problem.num_clients());
            bound_small_alpha(&stats, mu, l, cfg, dist0, rad)
        }
    }
}

/// Per-seed rows of the quantity a bound controls, indexed by round.
fn observed_rows(problem: &FederatedProblem, theorem: Theorem, runs: &[RunResult]) -> Result<Vec<Vec<f64>>> {
    match theorem {
        Theorem::StronglyConvex | Theorem::SmallAlpha => Ok(runs
            .iter()
            .map(|r| r.traces.iter().map(|t| t.dist_sq.unwrap_or(f64::NAN)).collect())
            .collect()),
        // Round 0 has no averaged iterate; it is reported as NaN.
        Theorem::Convex => {
            let f_star = problem.optimal_value().unwrap_or(f64::NAN);
            runs.iter()
                .map(|r| {
                    let its = r.iterates.as_ref().ok_or_else(|| Error::Capability("iterates were not recorded".into()))?;
                    let mut row = vec![f64::NAN];
                    let mut sum = Vector::zeros(problem.dim());
                    for (t, x) in its.iter().enumerate().skip(1).take(r.traces.len().saturating_sub(1)) {
                        sum += x;
                        let avg = &sum / t as f64;
                        row.push(problem.eval_f(&avg)? - f_star);
                    }
                    Ok(row)
                })
                .collect()
        }
        // Entry t is min over s < t; round 0 is NaN.
        Theorem::Nonconvex => Ok(runs
            .iter()
            .map(|r| {
                let mut row = vec![f64::NAN];
                let mut best = f64::INFINITY;
                for w in r.traces.windows(2) {
                    best = best.min(w[0].grad_norm_sq);
                    row.push(best);
                }
                row
            })
            .collect()),
    }
}

fn summarize(problem: &FederatedProblem, spec: &ExperimentSpec, runs: &[RunResult]) -> Result<ExperimentSummary> {
    let cfg = run_config(spec, problem)?;
    let len = spec.rounds + 1;
    let col = |get: fn(&crate::engine::RoundTrace) -> f64| -> Vec<Vec<f64>> {
        runs.iter().map(|r| r.traces.iter().map(get).collect()).collect()
    };
    let f = Series::from_rows(&col(|t| t.f_val), len);
    let grad_norm_sq = Series::from_rows(&col(|t| t.grad_norm_sq), len);
    let dist_sq = problem.optimum().map(|_| Series::from_rows(&col(|t| t.dist_sq.unwrap_or(f64::NAN)), len));

    let mut checks = Vec::new();
    for &theorem in &spec.bounds {
        let quantity = checked_quantity(theorem).unwrap_or("");
        let (bound, error) = match bound_curve(problem, &cfg, theorem) {
            Ok(curve) => (Some(curve), None),
            Err(e @ (Error::Regime(_) | Error::Capability(_) | Error::Data(_) | Error::Degenerate(_))) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        let observed = Series::from_rows(&observed_rows(problem, theorem, runs)?, len);
        let violations = match &bound {
            Some(curve) => (0..len)
                .filter(|&t| {
                    let (m, se) = (observed.mean[t], observed.se[t]);
                    m.is_finite() && !(m <= curve.values[t] + 2.0 * se)
                })
                .collect(),
            None => vec![],
        };
        checks.push(BoundCheck { theorem, quantity, bound, error, observed, violations });
    }

    let regime = if spec.algorithm == Algorithm::Nastya {
        check_stepsizes(&cfg, problem.smoothness(), problem.strong_convexity(), problem.samples_per_client())
    } else {
        vec![]
    };

    Ok(ExperimentSummary {
        algorithm: spec.algorithm.name(),
        rounds: spec.rounds,
        seeds: (0..spec.ensemble as u64).map(|i| spec.seed.wrapping_add(i)).collect(),
        diverged: runs.iter().filter(|r| r.diverged).count(),
        f,
        grad_norm_sq,
        dist_sq,
        checks,
        regime,
        client_step: spec.client_step,
        server_step: spec.server_step,
        cohort: spec.cohort,
    })
}

/// 17 significant digits, `nan` for missing values.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn at(v: &[f64], t: usize) -> f64 {
    v.get(t).copied().unwrap_or(f64::NAN)
}

/// Summary rows, header included.
pub fn summary_rows(summary: &ExperimentSummary, bounds: &[Theorem]) -> Vec<Vec<String>> {
    let mut rows = vec![summary_columns(bounds)];
    for t in 0..=summary.rounds {
        let mut row = vec![t.to_string()];
        row.push(fmt_float(at(&summary.f.mean, t)));
        row.push(fmt_float(at(&summary.f.se, t)));
        row.push(fmt_float(at(&summary.grad_norm_sq.mean, t)));
        row.push(fmt_float(at(&summary.grad_norm_sq.se, t)));
        let (dm, ds) = summary.dist_sq.as_ref().map_or((f64::NAN, f64::NAN), |d| (at(&d.mean, t), at(&d.se, t)));
        row.push(fmt_float(dm));
        row.push(fmt_float(ds));
        for b in bounds {
            let v = summary.check(*b).and_then(|c| c.bound.as_ref()).map_or(f64::NAN, |c| at(&c.values, t));
            row.push(fmt_float(v));
        }
        for b in bounds {
            if checked_quantity(*b) != Some("dist_sq") {
                let c = summary.check(*b);
                row.push(fmt_float(c.map_or(f64::NAN, |c| at(&c.observed.mean, t))));
                row.push(fmt_float(c.map_or(f64::NAN, |c| at(&c.observed.se, t))));
            }
        }
        rows.push(row);
    }
    rows
}

fn trace_rows(run: &RunResult, seed: u64) -> Vec<Vec<String>> {
    let mut rows = vec![TRACE_COLUMNS.iter().map(|c| c.to_string()).collect()];
    for tr in &run.traces {
        rows.push(vec![
            tr.round.to_string(),
            seed.to_string(),
            fmt_float(tr.f_val),
            fmt_float(tr.grad_norm_sq),
            fmt_float(tr.dist_sq.unwrap_or(f64::NAN)),
            fmt_float(tr.g_norm_sq),
        ]);
    }
    rows
}

pub(crate) fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    algorithm: &'a str,
    rounds: usize,
    ensemble: usize,
    base_seed: u64,
    client_step: f64,
    server_step: f64,
    cohort: usize,
    diverged: usize,
    regime: &'a [RegimeCheck],
    bounds: Vec<BoundMeta<'a>>,
}

#[derive(Serialize)]
struct BoundMeta<'a> {
    name: &'static str,
    quantity: &'static str,
    satisfied: bool,
    violations: usize,
    first_violation: Option<usize>,
    error: Option<&'a str>,
}

pub(crate) fn meta_json(spec: &ExperimentSpec, summary: &ExperimentSummary) -> Result<String> {
    let meta = Meta {
        algorithm: summary.algorithm,
        rounds: summary.rounds,
        ensemble: spec.ensemble,
        base_seed: spec.seed,
        client_step: spec.client_step,
        server_step: spec.server_step,
        cohort: spec.cohort,
        diverged: summary.diverged,
        regime: &summary.regime,
        bounds: summary
            .checks
            .iter()
            .map(|c| BoundMeta {
                name: c.theorem.name(),
                quantity: c.quantity,
                satisfied: c.satisfied(),
                violations: c.violations.len(),
                first_violation: c.violations.first().copied(),
                error: c.error.as_deref(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&meta).map_err(|e| Error::Resource(format!("json: {e}")))
}

/// Writes every file or none: on failure the files already written are removed.
pub(crate) fn write_all(dir: &Path, files: Vec<(String, FileBody)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        let res = match &body {
            FileBody::Csv(rows) => write_csv(&path, rows),
            FileBody::Text(text) => fs::write(&path, text).map_err(Error::from),
        };
        if let Err(e) = res {
            let _ = fs::remove_file(&path);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

pub(crate) enum FileBody {
    Csv(Vec<Vec<String>>),
    Text(String),
}

fn write_outputs(dir: &Path, spec: &ExperimentSpec, summary: &ExperimentSummary, runs: &[RunResult]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::with_capacity(runs.len() + 2);
    for (run, &seed) in runs.iter().zip(&summary.seeds) {
        files.push((format!("{}_seed{seed}.csv", spec.output), FileBody::Csv(trace_rows(run, seed))));
    }
    files.push((format!("{}_summary.csv", spec.output), FileBody::Csv(summary_rows(summary, &spec.bounds))));
    files.push((format!("{}_meta.json", spec.output), FileBody::Text(meta_json(spec, summary)? + "\n")));
    write_all(dir, files)
}
