use nalgebra::DMatrix;

use super::libsvm::SparseRow;
use super::optimum::{estimate_f_star, solve_quadratic_optimum};
use super::{ClientDataset, ConvexityClass, FederatedProblem, SampleLoss, Vector};
use crate::error::{Error, Result};
use crate::sampling::{sample_permutation, RngStream, StreamPurpose};

/// Strongly convex quadratic problem.
///
/// Sample `i` of every client uses the same Hessian `A_i` (eigenvalues in
/// `[μ, L]`, with both endpoints attained when `d ≥ 2`) and center
/// `b_i + o_m`, where `b_i` is standard Gaussian and the client offset `o_m`
/// is uniform on the sphere of radius `heterogeneity`. With zero
/// heterogeneity all clients are identical.
pub fn make_quadratic_problem(
    clients: usize,
    samples: usize,
    dim: usize,
    mu: f64,
    smoothness: f64,
    heterogeneity: f64,
    seed: u64,
) -> Result<FederatedProblem> {
    if clients == 0 || samples == 0 || dim == 0 {
        return Err(Error::input("M, n and d must all be >= 1"));
    }
    if !(mu > 0.0) {
        return Err(Error::input(format!("mu must be positive, got {mu}")));
    }
    if mu > smoothness || !smoothness.is_finite() {
        return Err(Error::input(format!("need mu <= L, got mu = {mu}, L = {smoothness}")));
    }
    if !(heterogeneity >= 0.0 && heterogeneity.is_finite()) {
        return Err(Error::input("heterogeneity must be a finite non-negative number"));
    }
    let mut rng = RngStream::derive(seed, 0, None, StreamPurpose::Problem);

    let templates: Vec<(DMatrix<f64>, Vector)> = (0..samples)
        .map(|_| {
            let hessian = random_spd(&mut rng, dim, mu, smoothness);
            let base = Vector::from_fn(dim, |_, _| rng.standard_normal());
            (hessian, base)
        })
        .collect();

    let mut datasets = Vec::with_capacity(clients);
    for _ in 0..clients {
        let offset = random_direction(&mut rng, dim) * heterogeneity;
        let losses = templates
            .iter()
            .map(|(a, b)| SampleLoss::quadratic(a.clone(), b + &offset))
            .collect::<Result<Vec<_>>>()?;
        datasets.push(ClientDataset::new(losses)?);
    }
    let problem = FederatedProblem::new(datasets, smoothness, mu, ConvexityClass::StronglyConvex)?;
    let x_star = solve_quadratic_optimum(&problem)?;
    problem.with_optimum(x_star)
}

/// `Q diag(λ) Qᵀ` with `Q` Haar-orthogonal.
fn random_spd(rng: &mut RngStream, d: usize, mu: f64, smoothness: f64) -> DMatrix<f64> {
    let mut eigen = vec![0.0; d];
    if d == 1 {
        eigen[0] = if mu == smoothness { mu } else { mu + (smoothness - mu) * rng.next_f64() };
    } else {
        eigen[0] = mu;
        eigen[1] = smoothness;
        let (lo, hi) = (mu.ln(), smoothness.ln());
        for e in eigen.iter_mut().skip(2) {
            *e = (lo + (hi - lo) * rng.next_f64()).exp().clamp(mu, smoothness);
        }
    }
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.standard_normal());
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign fix makes Q Haar distributed.
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let scaled = &q * DMatrix::from_diagonal(&Vector::from_vec(eigen));
    let a = scaled * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn random_direction(rng: &mut RngStream, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| rng.standard_normal());
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Bounded nonconvex problem `f^i_m(x) = ℓ(aᵀx − b)`, `ℓ(s) = s²/(1+s²)`.
///
/// Every sample has infimum exactly 0. The global `f*` is estimated by
/// multi-start descent and stored together with the descent tolerance.
pub fn make_nonconvex_problem(clients: usize, samples: usize, dim: usize, seed: u64) -> Result<FederatedProblem> {
    if clients == 0 || samples == 0 || dim == 0 {
        return Err(Error::input("M, n and d must all be >= 1"));
    }
    let mut rng = RngStream::derive(seed, 0, None, StreamPurpose::Problem);
    let mut datasets = Vec::with_capacity(clients);
    let mut smoothness = 0.0f64;
    for _ in 0..clients {
        let mut losses = Vec::with_capacity(samples);
        for _ in 0..samples {
            let a = Vector::from_fn(dim, |_, _| rng.standard_normal()) / (dim as f64).sqrt();
            let b = 2.0 * rng.standard_normal();
            let loss = SampleLoss::rational(a, b)?;
            smoothness = smoothness.max(loss.smoothness().unwrap_or(0.0));
            losses.push(loss);
        }
        datasets.push(ClientDataset::new(losses)?);
    }
    if smoothness == 0.0 {
        return Err(Error::Degenerate("all sampled directions are zero".into()));
    }
    let problem = FederatedProblem::new(datasets, smoothness, 0.0, ConvexityClass::Nonconvex)?;
    const TOL: f64 = 1e-9;
    let est = estimate_f_star(&problem, 8, TOL)?;
    let f_star = est.value;
    let out = problem.with_optimum(est.minimizer)?;
    Ok(out.with_optimal_value(f_star, TOL))
}

/// Labels equal to ±1 are kept; otherwise exactly two distinct labels are
/// required and mapped to −1 (smaller) and +1 (larger).
fn coerce_labels(rows: &[SparseRow]) -> Result<Vec<f64>> {
    if rows.iter().all(|r| r.label == 1.0 || r.label == -1.0) {
        return Ok(rows.iter().map(|r| r.label).collect());
    }
    let mut distinct: Vec<f64> = Vec::new();
    for r in rows {
        if !distinct.contains(&r.label) {
            distinct.push(r.label);
            if distinct.len() > 2 {
                return Err(Error::input(format!(
                    "labels cannot be coerced to {{-1, +1}}: found {:?}",
                    distinct
                )));
            }
        }
    }
    distinct.sort_by(f64::total_cmp);
    Ok(rows.iter().map(|r| if r.label == distinct[0] { -1.0 } else { 1.0 }).collect())
}

/// ℓ2-regularized logistic regression split over `clients` clients.
///
/// Rows are shuffled once with `seed`, truncated to `M·n` with
/// `n = ⌊rows/M⌋` and partitioned contiguously.
pub fn make_logreg_problem(
    rows: &[SparseRow],
    dim: usize,
    clients: usize,
    lambda: f64,
    seed: u64,
) -> Result<FederatedProblem> {
    if clients == 0 {
        return Err(Error::input("M must be >= 1"));
    }
    if rows.len() < clients {
        return Err(Error::input(format!("{} rows cannot fill {} clients", rows.len(), clients)));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be non-negative, got {lambda}")));
    }
    let dim = dim.max(rows.iter().filter_map(|r| r.features.last().map(|f| f.0)).max().unwrap_or(0));
    if dim == 0 {
        return Err(Error::input("rows have no features"));
    }
    let labels = coerce_labels(rows)?;
    let mut rng = RngStream::derive(seed, 0, None, StreamPurpose::Problem);
    let order = sample_permutation(rows.len(), &mut rng)?;
    let per_client = rows.len() / clients;

    let mut smoothness = 0.0f64;
    let mut datasets = Vec::with_capacity(clients);
    for chunk in order.as_slice()[..per_client * clients].chunks(per_client) {
        let losses = chunk
            .iter()
            .map(|&idx| {
                let mut a = Vector::zeros(dim);
                for &(j, v) in &rows[idx].features {
                    a[j - 1] = v;
                }
                let loss = SampleLoss::logistic(a, labels[idx], lambda)?;
                smoothness = smoothness.max(loss.smoothness().unwrap_or(0.0));
                Ok(loss)
            })
            .collect::<Result<Vec<_>>>()?;
        datasets.push(ClientDataset::new(losses)?);
    }
    if smoothness == 0.0 {
        return Err(Error::Degenerate("all feature rows are zero".into()));
    }
    let class = if lambda > 0.0 { ConvexityClass::StronglyConvex } else { ConvexityClass::Convex };
    FederatedProblem::new(datasets, smoothness, lambda, class)
}

/// Non-separable synthetic binary classification data: Gaussian features and
/// labels drawn from a logistic model around a random weight vector.
pub fn make_synthetic_classification(count: usize, dim: usize, seed: u64) -> Result<Vec<SparseRow>> {
    if dim == 0 {
        return Err(Error::input("d must be >= 1"));
    }
    let mut rng = RngStream::derive(seed, 1, None, StreamPurpose::Problem);
    let w = Vector::from_fn(dim, |_, _| rng.standard_normal());
    Ok((0..count)
        .map(|_| {
            let a = Vector::from_fn(dim, |_, _| rng.standard_normal());
            let p = super::loss::sigmoid(a.dot(&w));
            let label = if rng.next_f64() < p { 1.0 } else { -1.0 };
            SparseRow { label, features: a.iter().enumerate().map(|(j, &v)| (j + 1, v)).collect() }
        })
        .collect())
}
