//! Bound evaluators against a second, literal transcription of the formulas.

use nastya_core::problems::{ClientDataset, ConvexityClass, FederatedProblem, SampleLoss, Vector};
use nastya_core::theory::{
    bound_cvx, bound_ncvx, bound_sc, bound_small_alpha, heterogeneity_stats, sigma_rad_upper_bound, Dissimilarity,
    HeterogeneityStats,
};
use nastya_core::{RngStream, RunConfig, StreamPurpose};

struct Draw {
    l: f64,
    mu: f64,
    n: usize,
    m: usize,
    c: usize,
    sigma: f64,
    big_sigma: f64,
    delta: f64,
    d_sq: f64,
    rounds: usize,
    dist0: f64,
}

fn draw(rng: &mut RngStream) -> Draw {
    let l = 0.5 + 4.5 * rng.next_f64();
    let m = 1 + rng.below(10);
    let n = 1 + rng.below(10);
    let sigma = 3.0 * rng.next_f64();
    Draw {
        l,
        mu: l * (0.001 + 0.999 * rng.next_f64()),
        n,
        m,
        c: 1 + rng.below(m),
        sigma,
        big_sigma: n as f64 * sigma + 2.0 * rng.next_f64(),
        delta: rng.next_f64(),
        d_sq: 3.0 * rng.next_f64(),
        rounds: 1 + rng.below(500),
        dist0: 5.0 * rng.next_f64(),
    }
}

fn stats(d: &Draw) -> HeterogeneityStats {
    HeterogeneityStats {
        sigma_star_sq: d.sigma,
        sigma_star_m_sq: vec![0.0; d.m],
        client_grad_norm_sq: vec![0.0; d.m],
        big_sigma_star_sq: d.big_sigma,
        dissimilarity: Some(Dissimilarity {
            delta_star: d.delta,
            delta_star_m: vec![0.0; d.m],
            d_star_sq: d.d_sq,
            client_infima: vec![0.0; d.m],
            uncertainty: 0.0,
        }),
        clients: d.m,
        samples_per_client: d.n,
    }
}

fn p_oracle(m: usize, c: usize) -> f64 {
    let denominator = if m > 1 { c as f64 * (m as f64 - 1.0) } else { c as f64 };
    (m as f64 - c as f64) / denominator
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn dual_evaluators_agree_on_random_draws() {
    let mut rng = RngStream::derive(2024, 0, None, StreamPurpose::Problem);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let d = draw(&mut rng);
        let s = stats(&d);
        let n = d.n as f64;
        let p = p_oracle(d.m, d.c);
        let x0 = Vector::zeros(1);

        // Large server step regime.
        let gt = rng.next_f64() / (16.0 * d.l);
        let g = gt / n * (0.01 + 0.99 * rng.next_f64());
        let cfg = RunConfig::new(g, gt, d.c, d.rounds, x0.clone());
        let sc = bound_sc(&s, d.mu, d.l, &cfg, d.dist0).unwrap().values[d.rounds];
        let sc_oracle = (1.0 - gt * d.mu / 2.0).powi(d.rounds as i32) * d.dist0
            + 5.0 * g * g * n * d.l / d.mu * d.big_sigma
            + 8.0 * gt / d.mu * p * d.sigma;
        worst[0] = worst[0].max(rel(sc, sc_oracle));
        let cvx = bound_cvx(&s, d.l, &cfg, d.dist0).unwrap();
        let cvx_oracle =
            5.0 * d.dist0 / (2.0 * gt * d.rounds as f64) + 7.0 * g * g * n * d.l * d.big_sigma + 10.0 * gt * p * d.sigma;
        worst[1] = worst[1].max(rel(cvx, cvx_oracle));

        // Nonconvex regime.
        let gt = rng.next_f64() / (4.0 * d.l);
        let g = rng.next_f64() / (2.0 * n * d.l);
        let cfg = RunConfig::new(g, gt, d.c, d.rounds, x0.clone());
        let delta0 = d.dist0;
        let ncvx = bound_ncvx(&s, d.l, &cfg, delta0, d.rounds).unwrap();
        let l = d.l;
        let increment = 2.0 * l * l * gt * gt * p + 1.5 * gt * g * g * n * n * l * l * l;
        let ncvx_oracle = 8.0 * l * l * gt * p * d.delta
            + 6.0 * g * g * n * l * l * l * d.d_sq
            + 4.0 * (increment.ln_1p() * d.rounds as f64).exp() * delta0 / (gt * d.rounds as f64);
        worst[2] = worst[2].max(rel(ncvx, ncvx_oracle));

        // Small server step regime.
        let g = rng.next_f64() / d.l;
        let alpha = 0.999 * rng.next_f64();
        let cfg = RunConfig::new(g, alpha * g * n, d.c, d.rounds, x0);
        let rad = 10.0 * rng.next_f64();
        let sa = bound_small_alpha(&s, d.mu, d.l, &cfg, d.dist0, rad).unwrap().values[d.rounds];
        let q = 1.0 - g * d.mu;
        let mut qn = 1.0;
        let mut geo = 0.0;
        for _ in 0..d.n {
            geo += qn;
            qn *= q;
        }
        let a = cfg.alpha(d.n);
        let sa_oracle = (1.0 - a + a * qn).powi(d.rounds as i32) * d.dist0
            + a / ((1.0 - a) * (1.0 - qn)) * g * g * p * d.sigma
            + 2.0 * g * g * g * rad * geo / (1.0 - qn);
        worst[3] = worst[3].max(rel(sa, sa_oracle));
    }
    for (name, w) in ["sc", "cvx", "ncvx", "small_alpha"].iter().zip(worst) {
        assert!(w <= 1e-14, "{name}: max relative disagreement {w:e}");
    }
}

fn two_quadratics() -> FederatedProblem {
    let c1 = ClientDataset::new(vec![SampleLoss::quadratic_1d(1.0, 0.0).unwrap()]).unwrap();
    let c2 = ClientDataset::new(vec![SampleLoss::quadratic_1d(1.0, 2.0).unwrap()]).unwrap();
    FederatedProblem::new(vec![c1, c2], 1.0, 1.0, ConvexityClass::StronglyConvex)
        .unwrap()
        .with_optimum(Vector::from_element(1, 1.0))
        .unwrap()
}

#[test]
fn strongly_convex_bound_on_the_reference_problem() {
    // L = μ = 1, n = 1, C = 1 of M = 2: p = 1, σ*² = 1, Σ*² = 2, ‖x0 − x*‖² = 1.
    let p = two_quadratics();
    let s = heterogeneity_stats(&p, p.optimum().unwrap(), p.optimal_value().unwrap()).unwrap();
    let cfg = RunConfig::new(1.0 / 16.0, 1.0 / 16.0, 1, 10, Vector::zeros(1));
    let curve = bound_sc(&s, 1.0, 1.0, &cfg, 1.0).unwrap();
    assert_eq!(curve.values[0], 1.0 + 10.0 / 256.0 + 0.5);
    let t10 = (31.0f64 / 32.0).powi(10) + 10.0 / 256.0 + 0.5;
    assert!(rel(curve.values[10], t10) < 1e-15);
    assert_eq!(curve.floor(), 0.5390625);
}

#[test]
fn small_alpha_reshuffling_term_closed_form() {
    // Σ_{i<n} qⁱ = (1 − qⁿ)/(γμ), so the last term is 2γ²σ_rad²/μ.
    let p = two_quadratics();
    let s = heterogeneity_stats(&p, p.optimum().unwrap(), 0.5).unwrap();
    let rad = sigma_rad_upper_bound(&s, 1.0, 1, 2);
    assert_eq!(rad, 2.5);
    for (gamma, mu) in [(0.5, 1.0), (0.1, 0.3), (0.9, 0.05)] {
        let cfg = RunConfig::new(gamma, 0.5 * gamma, 2, 5, Vector::zeros(1));
        let curve = bound_small_alpha(&s, mu, 1.0, &cfg, 1.0, rad).unwrap();
        let closed = 2.0 * gamma * gamma * rad / mu;
        assert!(rel(curve.client_variance[0], closed) <= 1e-12);
    }
}

#[test]
fn curves_flatten_to_their_floor() {
    let p = two_quadratics();
    let s = heterogeneity_stats(&p, p.optimum().unwrap(), 0.5).unwrap();
    let cfg = RunConfig::new(1.0 / 16.0, 1.0 / 16.0, 1, 3000, Vector::zeros(1));
    let sc = bound_sc(&s, 1.0, 1.0, &cfg, 1.0).unwrap();
    assert!(rel(*sc.values.last().unwrap(), sc.floor()) < 1e-12);
    let cfg = RunConfig::new(0.5, 0.25, 1, 3000, Vector::zeros(1));
    let sa = bound_small_alpha(&s, 1.0, 1.0, &cfg, 1.0, 2.5).unwrap();
    assert!(rel(*sa.values.last().unwrap(), sa.floor()) < 1e-12);
    assert!(sa.values.windows(2).all(|w| w[1] <= w[0]));
}
