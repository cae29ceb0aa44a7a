//! Experiment spec files.
//!
//! A spec is a flat list of `key = value` lines (TOML syntax, dotted keys):
//!
//! ```text
//! problem.kind = "quadratic"
//! problem.M = 10
//! problem.n = 8
//! problem.d = 5
//! problem.mu = 0.01
//! problem.L = 1.0
//! problem.heterogeneity = 1.0
//! algo = "nastya"
//! cstep = 0.00078125
//! sstep = 0.0625
//! cohort = 5
//! T = 300
//! bounds = ["sc"]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::ShuffleMode;
use crate::error::{Error, Result};
use crate::problems::{
    make_logreg_problem, make_nonconvex_problem, make_quadratic_problem, make_synthetic_classification, parse_libsvm,
    FederatedProblem, Vector,
};
use crate::theory::Theorem;

pub const DEFAULT_ENSEMBLE: usize = 100;
pub const DEFAULT_REFERENCE_ITERS: usize = 100_000;
const REFERENCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nastya,
    Gd,
    LocalSgdWr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nastya => "nastya",
            Algorithm::Gd => "gd",
            Algorithm::LocalSgdWr => "local_sgd_wr",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Quadratic { clients: usize, samples: usize, dim: usize, mu: f64, smoothness: f64, heterogeneity: f64, seed: u64 },
    Nonconvex { clients: usize, samples: usize, dim: usize, seed: u64 },
    Logreg { source: LogregSource, clients: usize, lambda: f64, seed: u64, reference_iters: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum LogregSource {
    File(PathBuf),
    /// `M·n` synthetic rows of dimension `d`.
    Synthetic { samples: usize, dim: usize },
}

impl ProblemSpec {
    pub fn clients(&self) -> usize {
        match self {
            ProblemSpec::Quadratic { clients, .. }
            | ProblemSpec::Nonconvex { clients, .. }
            | ProblemSpec::Logreg { clients, .. } => *clients,
        }
    }

    /// Builds the problem, attaching a reference optimum where it is not
    /// known in closed form.
    pub fn build(&self) -> Result<FederatedProblem> {
        match self {
            &ProblemSpec::Quadratic { clients, samples, dim, mu, smoothness, heterogeneity, seed } => {
                make_quadratic_problem(clients, samples, dim, mu, smoothness, heterogeneity, seed)
            }
            &ProblemSpec::Nonconvex { clients, samples, dim, seed } => make_nonconvex_problem(clients, samples, dim, seed),
            ProblemSpec::Logreg { source, clients, lambda, seed, reference_iters } => {
                let (rows, dim) = match source {
                    LogregSource::File(path) => {
                        let data = parse_libsvm(path)?;
                        (data.rows, data.dim)
                    }
                    LogregSource::Synthetic { samples, dim } => {
                        (make_synthetic_classification(samples * clients, *dim, *seed)?, *dim)
                    }
                };
                let problem = make_logreg_problem(&rows, dim, *clients, *lambda, *seed)?;
                let est = crate::problems::estimate_f_star_from(
                    &problem,
                    &[Vector::zeros(problem.dim())],
                    REFERENCE_TOL,
                    crate::problems::DescentSettings { max_iters: *reference_iters, ..Default::default() },
                )?;
                let tol = if est.converged { REFERENCE_TOL } else { est.grad_norm };
                let f_star = est.value;
                Ok(problem.with_optimum(est.minimizer)?.with_optimal_value(f_star, tol))
            }
        }
    }
}

/// A validated experiment description with defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub algorithm: Algorithm,
    /// `γ`; unused by `gd`.
    pub client_step: f64,
    /// `γ̃`; the step size of `gd`.
    pub server_step: f64,
    /// Defaults to all clients.
    pub cohort: usize,
    pub rounds: usize,
    pub mode: ShuffleMode,
    pub seed: u64,
    pub ensemble: usize,
    pub bounds: Vec<Theorem>,
    pub output: String,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    #[serde(rename = "M")]
    clients: Option<usize>,
    n: Option<usize>,
    d: Option<usize>,
    mu: Option<f64>,
    #[serde(rename = "L")]
    smoothness: Option<f64>,
    heterogeneity: Option<f64>,
    libsvm_path: Option<PathBuf>,
    lambda: Option<f64>,
    seed: Option<u64>,
    reference_iters: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    problem: RawProblem,
    algo: Algorithm,
    cstep: Option<f64>,
    sstep: f64,
    cohort: Option<usize>,
    #[serde(rename = "T")]
    rounds: usize,
    mode: Option<ShuffleMode>,
    seed: Option<u64>,
    ensemble: Option<usize>,
    bounds: Option<Vec<String>>,
    output: Option<String>,
    x0: Option<Vec<f64>>,
}

fn need<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", path.display())))?;
    let mut spec = parse_spec(&text)?;
    // Relative dataset paths are resolved against the spec's directory.
    if let ProblemSpec::Logreg { source: LogregSource::File(p), .. } = &mut spec.problem {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(spec)
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let p = raw.problem;
    let problem = match p.kind.as_str() {
        "quadratic" => ProblemSpec::Quadratic {
            clients: need(p.clients, "problem.M")?,
            samples: need(p.n, "problem.n")?,
            dim: need(p.d, "problem.d")?,
            mu: need(p.mu, "problem.mu")?,
            smoothness: need(p.smoothness, "problem.L")?,
            heterogeneity: p.heterogeneity.unwrap_or(1.0),
            seed: p.seed.unwrap_or(0),
        },
        "nonconvex" => ProblemSpec::Nonconvex {
            clients: need(p.clients, "problem.M")?,
            samples: need(p.n, "problem.n")?,
            dim: need(p.d, "problem.d")?,
            seed: p.seed.unwrap_or(0),
        },
        "logreg" => ProblemSpec::Logreg {
            source: LogregSource::File(need(p.libsvm_path, "problem.libsvm_path")?),
            clients: need(p.clients, "problem.M")?,
            lambda: p.lambda.unwrap_or(0.0),
            seed: p.seed.unwrap_or(0),
            reference_iters: p.reference_iters.unwrap_or(DEFAULT_REFERENCE_ITERS),
        },
        "logreg_synthetic" => ProblemSpec::Logreg {
            source: LogregSource::Synthetic { samples: need(p.n, "problem.n")?, dim: need(p.d, "problem.d")? },
            clients: need(p.clients, "problem.M")?,
            lambda: p.lambda.unwrap_or(0.0),
            seed: p.seed.unwrap_or(0),
            reference_iters: p.reference_iters.unwrap_or(DEFAULT_REFERENCE_ITERS),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown problem.kind `{other}` (expected quadratic, nonconvex, logreg or logreg_synthetic)"
            )))
        }
    };
    let clients = problem.clients();
    if clients == 0 {
        return Err(Error::Config("problem.M must be >= 1".into()));
    }
    let cstep = match (raw.algo, raw.cstep) {
        (Algorithm::Gd, c) => c.unwrap_or(f64::NAN),
        (_, c) => need(c, "cstep")?,
    };
    let cohort = raw.cohort.unwrap_or(clients);
    if cohort == 0 || cohort > clients {
        return Err(Error::Config(format!("cohort = {cohort} must lie in [1, problem.M = {clients}]")));
    }
    let ensemble = raw.ensemble.unwrap_or(DEFAULT_ENSEMBLE);
    if ensemble == 0 {
        return Err(Error::Config("ensemble must be >= 1".into()));
    }
    if raw.rounds == 0 {
        return Err(Error::Config("T must be >= 1".into()));
    }
    let bounds = raw
        .bounds
        .unwrap_or_default()
        .iter()
        .map(|b| Theorem::from_name(b).ok_or_else(|| Error::Config(format!("unknown bound `{b}`"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSpec {
        problem,
        algorithm: raw.algo,
        client_step: cstep,
        server_step: raw.sstep,
        cohort,
        rounds: raw.rounds,
        mode: raw.mode.unwrap_or_default(),
        seed: raw.seed.unwrap_or(0),
        ensemble,
        bounds,
        output: raw.output.unwrap_or_else(|| "run".to_string()),
        x0: raw.x0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
problem.kind = "quadratic"
problem.M = 4
problem.n = 3
problem.d = 2
problem.mu = 0.1
problem.L = 1.0
algo = "nastya"
cstep = 0.01
sstep = 0.05
T = 20
"#;

    #[test]
    fn minimal_spec_gets_defaults() {
        let spec = parse_spec(MINIMAL).unwrap();
        assert_eq!(spec.ensemble, DEFAULT_ENSEMBLE);
        assert_eq!(spec.mode, ShuffleMode::RandomReshuffling);
        assert_eq!(spec.cohort, 4);
        assert_eq!(spec.seed, 0);
        assert!(spec.bounds.is_empty());
        assert_eq!(spec.output, "run");
    }

    #[test]
    fn cohort_larger_than_m_is_rejected() {
        let err = parse_spec(&format!("{MINIMAL}cohort = 5\n")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_spec(&format!("{MINIMAL}T = 30\n")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_spec(&format!("{MINIMAL}problem.colour = 3\n")).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = parse_spec(&format!("{MINIMAL}speed = 3\n")).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("cstep = 0.01\n", "");
        let err = parse_spec(&text).unwrap_err();
        assert!(err.to_string().contains("cstep"), "{err}");
        let text = MINIMAL.replace("problem.mu = 0.1\n", "");
        assert!(parse_spec(&text).unwrap_err().to_string().contains("problem.mu"));
    }

    #[test]
    fn mode_and_bounds_parse() {
        let spec = parse_spec(&format!("{MINIMAL}mode = \"shuffle_once\"\nbounds = [\"sc\", \"small_alpha\"]\n")).unwrap();
        assert_eq!(spec.mode, ShuffleMode::ShuffleOnce);
        assert_eq!(spec.bounds, vec![Theorem::StronglyConvex, Theorem::SmallAlpha]);
        assert!(parse_spec(&format!("{MINIMAL}bounds = [\"nope\"]\n")).is_err());
    }

    #[test]
    fn gd_needs_no_client_step() {
        let text = MINIMAL.replace("cstep = 0.01\n", "").replace("\"nastya\"", "\"gd\"");
        assert_eq!(parse_spec(&text).unwrap().algorithm, Algorithm::Gd);
    }
}
