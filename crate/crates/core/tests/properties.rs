use nastya_core::engine::{extrapolation_update, interpolation_update, local_pass_rr, nastya_round};
use nastya_core::problems::{make_quadratic_problem, ClientDataset, SampleLoss, Vector};
use nastya_core::sampling::{population_variance, sample_permutation};
use nastya_core::theory::{HeterogeneityStats, StatsOptions};
use nastya_core::{RngStream, RunConfig, StreamPurpose};
use proptest::prelude::*;

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logistic_and_rational_gradients_match_finite_differences(
        a in vec_of(3), x in vec_of(3), label in prop::bool::ANY, l2 in 0.0..1.0f64, offset in -2.0..2.0f64,
    ) {
        let a = Vector::from_vec(a);
        let x = Vector::from_vec(x);
        let losses = [
            SampleLoss::logistic(a.clone(), if label { 1.0 } else { -1.0 }, l2).unwrap(),
            SampleLoss::rational(a, offset).unwrap(),
        ];
        for loss in &losses {
            let g = loss.grad(&x);
            let h = 1e-6;
            for j in 0..3 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (loss.value(&xp) - loss.value(&xm)) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * g.norm().max(1.0));
            }
        }
    }

    #[test]
    fn nested_average_equals_flat_average(m in 1usize..6, n in 1usize..6, seed in 0u64..1000, x in vec_of(2)) {
        let problem = make_quadratic_problem(m, n, 2, 0.1, 2.0, 1.0, seed).unwrap();
        let x = Vector::from_vec(x);
        let samples: Vec<&SampleLoss> = problem.clients().iter().flat_map(|c| c.samples()).collect();
        let flat_f = samples.iter().map(|s| s.value(&x)).sum::<f64>() / samples.len() as f64;
        let flat_g = samples.iter().fold(Vector::zeros(2), |acc, s| acc + s.grad(&x)) / samples.len() as f64;
        let f = problem.eval_f(&x).unwrap();
        prop_assert!((f - flat_f).abs() <= 1e-12 * flat_f.abs().max(1.0));
        prop_assert!((problem.grad_f(&x).unwrap() - &flat_g).norm() <= 1e-12 * flat_g.norm().max(1.0));
    }

    /// Mean per-sample gradient energy at `x*` splits into client-gradient
    /// energy plus within-client variance.
    #[test]
    fn variance_decomposition(m in 1usize..6, n in 1usize..6, seed in 0u64..1000, het in 0.0..3.0f64) {
        let problem = make_quadratic_problem(m, n, 3, 0.2, 1.0, het, seed).unwrap();
        let xs = problem.optimum().unwrap().clone();
        let s = HeterogeneityStats::of(&problem, StatsOptions { dissimilarity: false, ..Default::default() }).unwrap();
        let within: f64 = problem
            .clients()
            .iter()
            .map(|c| population_variance(&c.samples().iter().map(|l| l.grad(&xs)).collect::<Vec<_>>()))
            .sum::<f64>() / m as f64;
        let lhs = s.sigma_star_m_sq.iter().sum::<f64>() / m as f64;
        prop_assert!((lhs - (s.sigma_star_sq + within)).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn three_update_forms_agree(
        m in 1usize..5, n in 1usize..5, seed in 0u64..1000, alpha in 0.05..8.0f64, step in 0.01..1.0f64, round in 0usize..4,
    ) {
        let problem = make_quadratic_problem(m, n, 2, 0.1, 1.0, 1.5, seed).unwrap();
        let gamma = step / n as f64;
        let x = Vector::from_vec(vec![1.0, -2.0]);
        let cfg = RunConfig::new(gamma, alpha * gamma * n as f64, 1 + (seed as usize % m), 3, x.clone()).with_seed(seed);
        let out = nastya_round(&problem, &x, &cfg, round).unwrap();
        let ext = extrapolation_update(&x, &out.x_ends, cfg.beta(n));
        let int = interpolation_update(&x, &out.x_ends, cfg.alpha(n));
        let scale = out.x_next.norm().max(1.0);
        prop_assert!((&out.x_next - &ext).norm() <= 1e-12 * scale);
        prop_assert!((&out.x_next - &int).norm() <= 1e-12 * scale);
    }

    /// The reported average of gradients equals the endpoint difference `(x_t − x^n)/(γn)`.
    #[test]
    fn estimator_identity(seed in 0u64..1000, step in 0.001..0.5f64, x in vec_of(3)) {
        let problem = make_quadratic_problem(1, 6, 3, 0.1, 1.0, 0.0, seed).unwrap();
        let client: &ClientDataset = &problem.clients()[0];
        let x = Vector::from_vec(x);
        let mut rng = RngStream::derive(seed, 0, Some(0), StreamPurpose::Permutation);
        let pi = sample_permutation(6, &mut rng).unwrap();
        let pass = local_pass_rr(client, &x, step, &pi).unwrap();
        let endpoint = (&x - &pass.x_end) / (step * 6.0);
        prop_assert!((&pass.g - &endpoint).norm() <= 1e-10 * pass.g.norm().max(1.0));
        prop_assert_eq!(pass.grad_evals, 6);
    }
}
