use nalgebra::DMatrix;

use super::{ClientDataset, FederatedProblem, SampleLoss, Vector};
use crate::error::{Error, Result};
use crate::sampling::{RngStream, StreamPurpose};

/// Limits for the gradient-descent optimum oracle.
#[derive(Clone, Copy, Debug)]
pub struct DescentSettings {
    pub max_iters: usize,
    /// Seed for the random restart points (restart 0 always starts at the origin).
    pub seed: u64,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self { max_iters: 200_000, seed: 0x0f57_a2 }
    }
}

/// Result of a multi-start descent. `value` is an upper bound on the infimum.
#[derive(Clone, Debug)]
pub struct FStarEstimate {
    pub value: f64,
    pub minimizer: Vector,
    /// Whether the best run reached the gradient tolerance before the cap.
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Solves `Ā x = (1/(Mn)) Σ A_{m,i} c_{m,i}` for an all-quadratic problem.
pub fn solve_quadratic_optimum(problem: &FederatedProblem) -> Result<Vector> {
    let x = solve_quadratic(problem.clients().iter().flat_map(|c| c.samples()), problem.dim())?;
    let residual = problem.grad_f(&x)?.norm();
    if residual > 1e-10 * (1.0 + x.norm()) * (1.0 + problem.smoothness()) {
        return Err(Error::Degenerate(format!("quadratic optimum residual {residual:e} too large")));
    }
    Ok(x)
}

pub(crate) fn solve_quadratic<'a>(samples: impl Iterator<Item = &'a SampleLoss>, d: usize) -> Result<Vector> {
    let mut hessian = DMatrix::zeros(d, d);
    let mut rhs = Vector::zeros(d);
    let mut count = 0usize;
    for s in samples {
        let (a, c) = s
            .as_quadratic()
            .ok_or_else(|| Error::input("closed-form optimum needs every sample to be quadratic"))?;
        hessian += a;
        rhs += a * c;
        count += 1;
    }
    if count == 0 {
        return Err(Error::input("no samples"));
    }
    hessian /= count as f64;
    rhs /= count as f64;
    let scale = hessian.amax().max(f64::MIN_POSITIVE);
    let lu = hessian.clone().lu();
    let x = lu.solve(&rhs).ok_or_else(|| Error::Degenerate("average hessian is singular".into()))?;
    // LU succeeds on numerically singular matrices; reject those explicitly.
    let eig = nalgebra::SymmetricEigen::new(hessian).eigenvalues;
    if eig.min() <= 1e-13 * scale {
        return Err(Error::Degenerate("average hessian is singular".into()));
    }
    Ok(x)
}

/// Multi-start gradient descent with step `1/L` on `f`.
///
/// Restart 0 starts at the origin; the others at standard Gaussian points
/// drawn from a fixed stream. The returned value is the best objective seen,
/// hence an upper bound on `f*`.
pub fn estimate_f_star(problem: &FederatedProblem, restarts: usize, tol: f64) -> Result<FStarEstimate> {
    let starts = restart_points(problem.dim(), restarts, DescentSettings::default().seed)?;
    estimate_f_star_from(problem, &starts, tol, DescentSettings::default())
}

pub fn estimate_f_star_from(
    problem: &FederatedProblem,
    starts: &[Vector],
    tol: f64,
    settings: DescentSettings,
) -> Result<FStarEstimate> {
    for s in starts {
        problem.check_dim(s)?;
    }
    multi_start(
        starts,
        tol,
        problem.smoothness(),
        settings.max_iters,
        |x| problem.eval_f(x).expect("dimension checked"),
        |x| problem.grad_f(x).expect("dimension checked"),
    )
}

/// `inf f_m` for one client: closed form for quadratics, multi-start
/// descent otherwise.
pub fn estimate_client_infimum(client: &ClientDataset, restarts: usize, tol: f64) -> Result<FStarEstimate> {
    if client.samples().iter().all(|s| s.as_quadratic().is_some()) {
        if let Ok(x) = solve_quadratic(client.samples().iter(), client.dim()) {
            let grad_norm = client.grad(&x).norm();
            return Ok(FStarEstimate { value: client.value(&x), minimizer: x, converged: true, iterations: 0, grad_norm });
        }
    }
    let smoothness = client
        .smoothness()
        .ok_or_else(|| Error::Capability("client smoothness constant unknown".into()))?;
    let starts = restart_points(client.dim(), restarts, DescentSettings::default().seed)?;
    multi_start(&starts, tol, smoothness, DescentSettings::default().max_iters, |x| client.value(x), |x| client.grad(x))
}

fn restart_points(d: usize, restarts: usize, seed: u64) -> Result<Vec<Vector>> {
    if restarts == 0 {
        return Err(Error::input("restarts must be >= 1"));
    }
    let mut rng = RngStream::derive(seed, 0, None, StreamPurpose::Restart);
    let mut starts = vec![Vector::zeros(d)];
    for _ in 1..restarts {
        starts.push(Vector::from_fn(d, |_, _| rng.standard_normal()));
    }
    Ok(starts)
}

fn multi_start(
    starts: &[Vector],
    tol: f64,
    smoothness: f64,
    max_iters: usize,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
) -> Result<FStarEstimate> {
    let step = 1.0 / smoothness;
    let mut best: Option<FStarEstimate> = None;
    for start in starts {
        let mut x = start.clone();
        let mut g = grad(&x);
        let mut iterations = 0;
        while g.norm() > tol && iterations < max_iters {
            x.axpy(-step, &g, 1.0);
            g = grad(&x);
            iterations += 1;
        }
        let candidate = FStarEstimate {
            value: value(&x),
            converged: g.norm() <= tol,
            grad_norm: g.norm(),
            minimizer: x,
            iterations,
        };
        if !candidate.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| candidate.value < b.value) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::Degenerate("descent produced no finite objective value".into()))
}
