//! Upper-bound evaluators for the four convergence regimes.
//!
//! The strongly convex and convex bounds weight the client-sampling term by
//! the participation factor `p`. The nonconvex bound uses the exponent base
//! `1 + 2L²γ̃²·p + (3/2)γ̃γ²n²L³` together with `γ̃ ≤ 1/(4L)`.

use serde::Serialize;

use super::stats::{participation_factor, HeterogeneityStats};
use crate::engine::RunConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    /// Strongly convex `f`, convex samples: `E‖x_T − x*‖²`.
    #[serde(rename = "sc")]
    StronglyConvex,
    /// Convex samples: `E[f(x̂_T) − f*]`.
    #[serde(rename = "cvx")]
    Convex,
    /// Smooth nonconvex: `min_{t<T} E‖∇f(x_t)‖²`.
    #[serde(rename = "ncvx")]
    Nonconvex,
    /// Strongly convex samples, pull-back server step `α < 1`: `E‖x_T − x*‖²`.
    #[serde(rename = "small_alpha")]
    SmallAlpha,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [Theorem::StronglyConvex, Theorem::Convex, Theorem::Nonconvex, Theorem::SmallAlpha];

    /// Short identifier used in CSV columns and spec files.
    pub fn name(self) -> &'static str {
        match self {
            Theorem::StronglyConvex => "sc",
            Theorem::Convex => "cvx",
            Theorem::Nonconvex => "ncvx",
            Theorem::SmallAlpha => "small_alpha",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Per-round bound values `T' = 0..=T` and their additive parts.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCurve {
    pub theorem: Theorem,
    pub values: Vec<f64>,
    /// Decays with the number of rounds.
    pub contraction: Vec<f64>,
    /// Random-reshuffling / client-drift variance, vanishes as `γ → 0`.
    pub client_variance: Vec<f64>,
    /// Client-sampling variance, vanishes when `C = M`.
    pub participation: Vec<f64>,
}

impl BoundCurve {
    fn from_terms(theorem: Theorem, contraction: Vec<f64>, client_variance: Vec<f64>, participation: Vec<f64>) -> Self {
        let values = contraction
            .iter()
            .zip(&client_variance)
            .zip(&participation)
            .map(|((a, b), c)| a + b + c)
            .collect();
        Self { theorem, values, contraction, client_variance, participation }
    }

    /// The round-independent part the curve settles at.
    pub fn floor(&self) -> f64 {
        self.client_variance.last().copied().unwrap_or(0.0) + self.participation.last().copied().unwrap_or(0.0)
    }
}

/// `a ≤ b` up to a relative rounding slack, so boundary stepsizes such as
/// `γ = γ̃/n` are accepted.
fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12)
}

fn require(conditions: &[(bool, &str)]) -> Result<()> {
    let violated: Vec<String> = conditions.iter().filter(|(ok, _)| !ok).map(|(_, txt)| txt.to_string()).collect();
    if violated.is_empty() {
        Ok(())
    } else {
        Err(Error::Regime(violated))
    }
}

const SC_LOWER: &str = "γn ≤ γ̃";
const SC_UPPER: &str = "γ̃ ≤ 1/(16L)";
const NCVX_CLIENT: &str = "γ ≤ 1/(2nL)";
const NCVX_SERVER: &str = "γ̃ ≤ 1/(4L)";
const SA_CLIENT: &str = "γ ≤ 1/L";
const SA_ALPHA: &str = "0 ≤ α < 1";
const MU_POSITIVE: &str = "μ > 0";

fn large_server_conditions(cfg: &RunConfig, smoothness: f64, n: usize) -> [(bool, &'static str); 2] {
    [
        (le(cfg.client_step * n as f64, cfg.server_step), SC_LOWER),
        (le(cfg.server_step, 1.0 / (16.0 * smoothness)), SC_UPPER),
    ]
}

fn ncvx_conditions(cfg: &RunConfig, smoothness: f64, n: usize) -> [(bool, &'static str); 2] {
    [
        (le(cfg.client_step, 1.0 / (2.0 * n as f64 * smoothness)), NCVX_CLIENT),
        (le(cfg.server_step, 1.0 / (4.0 * smoothness)), NCVX_SERVER),
    ]
}

fn small_alpha_conditions(cfg: &RunConfig, smoothness: f64, n: usize) -> [(bool, &'static str); 2] {
    let alpha = cfg.alpha(n);
    [(le(cfg.client_step, 1.0 / smoothness), SA_CLIENT), ((0.0..1.0).contains(&alpha), SA_ALPHA)]
}

/// Strongly convex bound on `E‖x_T − x*‖²`:
///
/// `(1 − γ̃μ/2)^T ‖x_0 − x*‖² + (5γ²nL/μ) Σ*² + (8γ̃/μ) p σ*²`.
///
/// A looser variant ends with `(8γ̃/μ) Σ_m ‖∇f_m(x*)‖²`; the
/// participation-weighted term is used here.
pub fn bound_sc(
    stats: &HeterogeneityStats,
    mu: f64,
    smoothness: f64,
    cfg: &RunConfig,
    dist0_sq: f64,
) -> Result<BoundCurve> {
    let n = stats.samples_per_client;
    let mut conditions = large_server_conditions(cfg, smoothness, n).to_vec();
    conditions.push((mu > 0.0, MU_POSITIVE));
    require(&conditions)?;
    let (gamma, server) = (cfg.client_step, cfg.server_step);
    let rate = 1.0 - server * mu / 2.0;
    let variance = 5.0 * gamma * gamma * n as f64 * smoothness / mu * stats.big_sigma_star_sq;
    let sampling = 8.0 * server / mu * stats.participation_factor(cfg.cohort_size) * stats.sigma_star_sq;
    let rounds = cfg.rounds;
    let contraction = (0..=rounds).map(|t| rate.powi(t as i32) * dist0_sq).collect();
    Ok(BoundCurve::from_terms(Theorem::StronglyConvex, contraction, vec![variance; rounds + 1], vec![sampling; rounds + 1]))
}

/// Convex bound on `E[f(x̂_T) − f*]` with `x̂_T` the mean of `x_1, …, x_T`:
///
/// `5‖x_0 − x*‖²/(2γ̃T) + 7γ²nL Σ*² + 10γ̃ p σ*²`, with `T = cfg.rounds`.
pub fn bound_cvx(stats: &HeterogeneityStats, smoothness: f64, cfg: &RunConfig, dist0_sq: f64) -> Result<f64> {
    Ok(bound_cvx_parts(stats, smoothness, cfg, dist0_sq, cfg.rounds)?.iter().sum())
}

/// The three terms of [`bound_cvx`] at horizon `rounds` (infinite first term at 0).
pub fn bound_cvx_parts(
    stats: &HeterogeneityStats,
    smoothness: f64,
    cfg: &RunConfig,
    dist0_sq: f64,
    rounds: usize,
) -> Result<[f64; 3]> {
    let n = stats.samples_per_client;
    require(&large_server_conditions(cfg, smoothness, n))?;
    let (gamma, server) = (cfg.client_step, cfg.server_step);
    let contraction = 5.0 * dist0_sq / (2.0 * server * rounds as f64);
    let variance = 7.0 * gamma * gamma * n as f64 * smoothness * stats.big_sigma_star_sq;
    let sampling = 10.0 * server * stats.participation_factor(cfg.cohort_size) * stats.sigma_star_sq;
    Ok([contraction, variance, sampling])
}

/// Per-round curve of [`bound_cvx`] for horizons `0..=cfg.rounds`.
pub fn bound_cvx_curve(stats: &HeterogeneityStats, smoothness: f64, cfg: &RunConfig, dist0_sq: f64) -> Result<BoundCurve> {
    let parts = (0..=cfg.rounds)
        .map(|t| bound_cvx_parts(stats, smoothness, cfg, dist0_sq, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve::from_terms(
        Theorem::Convex,
        parts.iter().map(|p| p[0]).collect(),
        parts.iter().map(|p| p[1]).collect(),
        parts.iter().map(|p| p[2]).collect(),
    ))
}

/// Nonconvex bound on `min_{t<T} E‖∇f(x_t)‖²`:
///
/// `8L²γ̃ p Δ* + 6γ²nL³ D*² + 4(1 + 2L²γ̃²p + (3/2)γ̃γ²n²L³)^T δ_0 / (γ̃T)`.
///
/// A shorter variant uses base `1 + 4γ̃γ²n²L³` with `γ̃ ≤ 1/L`; it is not
/// implemented.
pub fn bound_ncvx(stats: &HeterogeneityStats, smoothness: f64, cfg: &RunConfig, delta0: f64, rounds: usize) -> Result<f64> {
    Ok(bound_ncvx_parts(stats, smoothness, cfg, delta0, rounds)?.iter().sum())
}

pub fn bound_ncvx_parts(
    stats: &HeterogeneityStats,
    smoothness: f64,
    cfg: &RunConfig,
    delta0: f64,
    rounds: usize,
) -> Result<[f64; 3]> {
    let n = stats.samples_per_client as f64;
    require(&ncvx_conditions(cfg, smoothness, stats.samples_per_client))?;
    let diss = stats
        .dissimilarity
        .as_ref()
        .ok_or_else(|| Error::Capability("dissimilarity statistics (Δ*, D*²) were not computed".into()))?;
    if diss.delta_star < -diss.uncertainty - 1e-12 {
        return Err(Error::Data(format!(
            "Δ* = {} is negative beyond its estimation tolerance {}",
            diss.delta_star, diss.uncertainty
        )));
    }
    let delta_star = diss.delta_star.max(0.0);
    let (gamma, server, l) = (cfg.client_step, cfg.server_step, smoothness);
    let p = stats.participation_factor(cfg.cohort_size);
    let sampling = 8.0 * l * l * server * p * delta_star;
    let variance = 6.0 * gamma * gamma * n * l.powi(3) * diss.d_star_sq;
    // base^T through ln_1p keeps full precision for bases close to 1.
    let growth = 2.0 * l * l * server * server * p + 1.5 * server * gamma * gamma * n * n * l.powi(3);
    let contraction = 4.0 * (rounds as f64 * growth.ln_1p()).exp() * delta0 / (server * rounds as f64);
    Ok([contraction, variance, sampling])
}

pub fn bound_ncvx_curve(stats: &HeterogeneityStats, smoothness: f64, cfg: &RunConfig, delta0: f64) -> Result<BoundCurve> {
    let parts = (0..=cfg.rounds)
        .map(|t| bound_ncvx_parts(stats, smoothness, cfg, delta0, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve::from_terms(
        Theorem::Nonconvex,
        parts.iter().map(|p| p[0]).collect(),
        parts.iter().map(|p| p[1]).collect(),
        parts.iter().map(|p| p[2]).collect(),
    ))
}

/// Small-server-stepsize bound on `E‖x_T − x*‖²` with `α = γ̃/(γn) ∈ [0,1)`
/// and `q = 1 − γμ`:
///
/// `(1 − α + αqⁿ)^T ‖x_0 − x*‖² + α/((1−α)(1−qⁿ)) γ² p σ*²
///  + 2γ³ σ_rad² Σ_{i<n} qⁱ / (1 − qⁿ)`.
pub fn bound_small_alpha(
    stats: &HeterogeneityStats,
    mu: f64,
    smoothness: f64,
    cfg: &RunConfig,
    dist0_sq: f64,
    sigma_rad_sq: f64,
) -> Result<BoundCurve> {
    let n = stats.samples_per_client;
    let mut conditions = small_alpha_conditions(cfg, smoothness, n).to_vec();
    conditions.push((mu > 0.0, MU_POSITIVE));
    require(&conditions)?;
    let gamma = cfg.client_step;
    let alpha = cfg.alpha(n);
    let q = 1.0 - gamma * mu;
    let qn = q.powi(n as i32);
    let geometric: f64 = (0..n).map(|i| q.powi(i as i32)).sum();
    let base = 1.0 - alpha + alpha * qn;
    let sampling =
        alpha / ((1.0 - alpha) * (1.0 - qn)) * gamma * gamma * stats.participation_factor(cfg.cohort_size) * stats.sigma_star_sq;
    let reshuffling = 2.0 * gamma.powi(3) * sigma_rad_sq * geometric / (1.0 - qn);
    let rounds = cfg.rounds;
    let contraction = (0..=rounds).map(|t| base.powi(t as i32) * dist0_sq).collect();
    Ok(BoundCurve::from_terms(Theorem::SmallAlpha, contraction, vec![reshuffling; rounds + 1], vec![sampling; rounds + 1]))
}

/// Applicability of one theorem to a configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub theorem: Theorem,
    pub satisfied: bool,
    pub violated: Vec<String>,
}

/// Reports, per theorem, which stepsize conditions a configuration violates.
pub fn check_stepsizes(cfg: &RunConfig, smoothness: f64, mu: f64, n: usize) -> Vec<RegimeCheck> {
    let report = |theorem, conds: &[(bool, &str)]| {
        let violated: Vec<String> = conds.iter().filter(|(ok, _)| !ok).map(|(_, t)| t.to_string()).collect();
        RegimeCheck { theorem, satisfied: violated.is_empty(), violated }
    };
    let large = large_server_conditions(cfg, smoothness, n);
    let mut sc = large.to_vec();
    sc.push((mu > 0.0, MU_POSITIVE));
    let mut sa = small_alpha_conditions(cfg, smoothness, n).to_vec();
    sa.push((mu > 0.0, MU_POSITIVE));
    vec![
        report(Theorem::StronglyConvex, &sc),
        report(Theorem::Convex, &large),
        report(Theorem::Nonconvex, &ncvx_conditions(cfg, smoothness, n)),
        report(Theorem::SmallAlpha, &sa),
    ]
}

/// A stepsize triple suggested for one regime.
#[derive(Clone, Debug, Serialize)]
pub struct StepsizeSuggestion {
    pub client_step: f64,
    pub server_step: f64,
    pub alpha: f64,
    /// The inequalities the suggestion sits on.
    pub governing: String,
    pub note: Option<String>,
}

/// Largest `α` suggested in the pull-back regime, which excludes `α = 1`.
pub const MAX_SUGGESTED_ALPHA: f64 = 0.99;

#[allow(clippy::too_many_arguments)]
pub fn recommended_stepsizes(
    regime: Theorem,
    smoothness: f64,
    mu: f64,
    n: usize,
    cohort_size: usize,
    clients: usize,
    epsilon: f64,
    sigma_star_sq: f64,
) -> Result<StepsizeSuggestion> {
    if !(epsilon > 0.0) {
        return Err(Error::input("target accuracy epsilon must be > 0"));
    }
    let nf = n as f64;
    let suggestion = match regime {
        Theorem::StronglyConvex | Theorem::Convex => {
            let server_step = 1.0 / (16.0 * smoothness);
            let client_step = server_step / nf;
            StepsizeSuggestion {
                client_step,
                server_step,
                alpha: server_step / (client_step * nf),
                governing: format!("{SC_LOWER} ≤ 1/(16L) (both at equality)"),
                note: None,
            }
        }
        Theorem::Nonconvex => {
            let client_step = 1.0 / (2.0 * nf * smoothness);
            let server_step = 1.0 / (4.0 * smoothness);
            StepsizeSuggestion {
                client_step,
                server_step,
                alpha: server_step / (client_step * nf),
                governing: format!("{NCVX_CLIENT} and {NCVX_SERVER} (both at equality)"),
                note: None,
            }
        }
        Theorem::SmallAlpha => {
            if !(mu > 0.0) {
                return Err(Error::input("pull-back regime needs mu > 0"));
            }
            let client_step = 1.0 / smoothness;
            let noise = participation_factor(clients, cohort_size) * sigma_star_sq;
            let (alpha, note) = if noise <= 0.0 {
                let why = if cohort_size == clients {
                    "full participation (C = M): no client-sampling noise to damp, α → 1"
                } else {
                    "σ*² = 0: no client-sampling noise to damp, α → 1"
                };
                (MAX_SUGGESTED_ALPHA, Some(why.to_string()))
            } else {
                // γ̃ ∝ Cε/σ*², i.e. α = γ̃/(γn).
                let server_step = cohort_size as f64 * epsilon / sigma_star_sq;
                let raw = server_step / (client_step * nf);
                let clipped = raw.clamp(0.0, MAX_SUGGESTED_ALPHA);
                let note = (clipped != raw).then(|| format!("α = {raw:.3e} clipped to [0, {MAX_SUGGESTED_ALPHA}]"));
                (clipped, note)
            };
            StepsizeSuggestion {
                client_step,
                server_step: alpha * client_step * nf,
                alpha,
                governing: format!("{SA_CLIENT}, {SA_ALPHA}, γ̃ ∝ Cε/σ*²"),
                note,
            }
        }
    };
    Ok(suggestion)
}
