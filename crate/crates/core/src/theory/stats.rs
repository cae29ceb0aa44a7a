use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::{estimate_client_infimum, FederatedProblem, Vector};

/// Gradient variance and functional dissimilarity at the optimum.
#[derive(Clone, Debug, Serialize)]
pub struct HeterogeneityStats {
    /// `σ*² = (1/M) Σ_m ‖∇f_m(x*)‖²`.
    pub sigma_star_sq: f64,
    /// `σ*,m² = (1/n) Σ_i ‖∇f^i_m(x*)‖²`, one per client.
    pub sigma_star_m_sq: Vec<f64>,
    /// `‖∇f_m(x*)‖²`, one per client.
    pub client_grad_norm_sq: Vec<f64>,
    /// `Σ*² = (1/M) Σ_m σ*,m² + n σ*²`.
    pub big_sigma_star_sq: f64,
    pub dissimilarity: Option<Dissimilarity>,
    pub clients: usize,
    pub samples_per_client: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Dissimilarity {
    /// `Δ* = f* − (1/M) Σ_m f_{*,m}`.
    pub delta_star: f64,
    /// `Δ*,m = f* − (1/n) Σ_i f^i_{*,m}`.
    pub delta_star_m: Vec<f64>,
    /// `D*² = (1/M) Σ_m Δ*,m + n Δ*`.
    pub d_star_sq: f64,
    /// Estimated client infima `f_{*,m}`.
    pub client_infima: Vec<f64>,
    /// Accumulated tolerance of the `f*` and `f_{*,m}` estimates.
    pub uncertainty: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StatsOptions {
    /// Compute `Δ*`, `Δ*,m` and `D*²` (needs per-client descent for
    /// non-quadratic problems).
    pub dissimilarity: bool,
    pub client_restarts: usize,
    pub client_tol: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self { dissimilarity: true, client_restarts: 4, client_tol: 1e-9 }
    }
}

impl HeterogeneityStats {
    /// Uses the optimum stored on the problem.
    pub fn of(problem: &FederatedProblem, options: StatsOptions) -> Result<Self> {
        heterogeneity_stats_with(problem, problem.optimum(), problem.optimal_value(), options)
    }

    pub fn participation_factor(&self, cohort_size: usize) -> f64 {
        participation_factor(self.clients, cohort_size)
    }
}

/// `(M − C) / (C · max{M − 1, 1})`.
pub fn participation_factor(clients: usize, cohort_size: usize) -> f64 {
    let m = clients as f64;
    let c = cohort_size as f64;
    (m - c) / (c * (m - 1.0).max(1.0))
}

pub fn heterogeneity_stats(problem: &FederatedProblem, x_star: &Vector, f_star: f64) -> Result<HeterogeneityStats> {
    heterogeneity_stats_with(problem, Some(x_star), Some(f_star), StatsOptions::default())
}

pub fn heterogeneity_stats_with(
    problem: &FederatedProblem,
    x_star: Option<&Vector>,
    f_star: Option<f64>,
    options: StatsOptions,
) -> Result<HeterogeneityStats> {
    let x_star = x_star.ok_or_else(|| Error::Capability("x_star (minimizer of f) is not known".into()))?;
    let f_star = f_star.ok_or_else(|| Error::Capability("f_star (optimal value of f) is not known".into()))?;
    problem.check_dim(x_star)?;
    let n = problem.samples_per_client();
    let m = problem.num_clients();

    let mut sigma_star_m_sq = Vec::with_capacity(m);
    let mut client_grad_norm_sq = Vec::with_capacity(m);
    for client in problem.clients() {
        let per_sample = client.samples().iter().map(|s| s.grad(x_star).norm_squared()).sum::<f64>() / n as f64;
        sigma_star_m_sq.push(per_sample);
        client_grad_norm_sq.push(client.grad(x_star).norm_squared());
    }
    let sigma_star_sq = client_grad_norm_sq.iter().sum::<f64>() / m as f64;
    let big_sigma_star_sq = sigma_star_m_sq.iter().sum::<f64>() / m as f64 + n as f64 * sigma_star_sq;

    let dissimilarity = if options.dissimilarity {
        Some(dissimilarity(problem, f_star, options)?)
    } else {
        None
    };

    Ok(HeterogeneityStats {
        sigma_star_sq,
        sigma_star_m_sq,
        client_grad_norm_sq,
        big_sigma_star_sq,
        dissimilarity,
        clients: m,
        samples_per_client: n,
    })
}

fn dissimilarity(problem: &FederatedProblem, f_star: f64, options: StatsOptions) -> Result<Dissimilarity> {
    let n = problem.samples_per_client();
    let m = problem.num_clients();
    let mut delta_star_m = Vec::with_capacity(m);
    let mut client_infima = Vec::with_capacity(m);
    let mut uncertainty = problem.optimal_value_tol();
    for (idx, client) in problem.clients().iter().enumerate() {
        let mean_inf = client
            .mean_sample_infimum()
            .ok_or_else(|| Error::Capability(format!("client {idx} has samples without a known infimum")))?;
        delta_star_m.push(f_star - mean_inf);
        let est = estimate_client_infimum(client, options.client_restarts, options.client_tol)?;
        if est.iterations > 0 {
            uncertainty += options.client_tol / m as f64;
        }
        client_infima.push(est.value);
    }
    let delta_star = f_star - client_infima.iter().sum::<f64>() / m as f64;
    let d_star_sq = delta_star_m.iter().sum::<f64>() / m as f64 + n as f64 * delta_star;
    Ok(Dissimilarity { delta_star, delta_star_m, d_star_sq, client_infima, uncertainty })
}

/// Proof-stated upper bound on the random-reshuffling variance constant:
/// `L Σ_m (n² ‖∇f_m(x*)‖² + (n/4) σ*,m²)`.
pub fn sigma_rad_upper_bound(stats: &HeterogeneityStats, smoothness: f64, n: usize, clients: usize) -> f64 {
    let n = n as f64;
    debug_assert_eq!(clients, stats.client_grad_norm_sq.len());
    smoothness
        * stats
            .client_grad_norm_sq
            .iter()
            .zip(&stats.sigma_star_m_sq)
            .map(|(g, s)| n * n * g + 0.25 * n * s)
            .sum::<f64>()
}
