//! Finite-sum federated objectives
//!
//! ```text
//! f(x) = (1/M) Σ_m f_m(x),    f_m(x) = (1/n) Σ_i f^i_m(x)
//! ```
//!
//! with `M` clients holding `n` samples each. Problems are immutable once
//! built; all oracles are pure and may be shared across threads.

mod generators;
mod libsvm;
mod loss;
mod optimum;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use generators::{
    make_logreg_problem, make_nonconvex_problem, make_quadratic_problem, make_synthetic_classification,
};
pub use libsvm::{parse_libsvm, parse_libsvm_reader, parse_libsvm_str, write_libsvm, LibsvmData, SparseRow};
pub use loss::{LossKind, SampleLoss};
pub use optimum::{
    estimate_client_infimum, estimate_f_star, estimate_f_star_from, solve_quadratic_optimum, DescentSettings,
    FStarEstimate,
};

pub type Vector = DVector<f64>;

/// Builds a vector, rejecting NaN and infinite entries.
pub fn vector(entries: Vec<f64>) -> Result<Vector> {
    if entries.is_empty() {
        return Err(Error::input("vector must have d >= 1"));
    }
    if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("vector entry {bad} is not finite")));
    }
    Ok(Vector::from_vec(entries))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConvexityClass {
    StronglyConvex,
    Convex,
    Nonconvex,
}

/// The `n` local losses of one client.
#[derive(Clone, Debug)]
pub struct ClientDataset {
    samples: Vec<SampleLoss>,
}

impl ClientDataset {
    pub fn new(samples: Vec<SampleLoss>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::input("client needs n >= 1 samples"))?;
        let d = first.dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
            return Err(Error::Dimension { expected: d, got: bad.dim() });
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[SampleLoss] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    /// `f_m(x)`.
    pub fn value(&self, x: &Vector) -> f64 {
        self.samples.iter().map(|s| s.value(x)).sum::<f64>() / self.samples.len() as f64
    }

    /// `∇f_m(x)`.
    pub fn grad(&self, x: &Vector) -> Vector {
        let mut acc = Vector::zeros(x.len());
        let mut scratch = Vector::zeros(x.len());
        for s in &self.samples {
            s.grad_into(x, &mut scratch);
            acc += &scratch;
        }
        acc / self.samples.len() as f64
    }

    /// Largest per-sample smoothness constant, if every sample knows one.
    pub fn smoothness(&self) -> Option<f64> {
        self.samples.iter().map(SampleLoss::smoothness).try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
    }

    /// `(1/n) Σ_i f^i_{*,m}`, if every sample has an analytic infimum.
    pub fn mean_sample_infimum(&self) -> Option<f64> {
        let total = self.samples.iter().map(SampleLoss::infimum).try_fold(0.0, |acc, v| v.map(|v| acc + v))?;
        Some(total / self.samples.len() as f64)
    }

    pub(crate) fn shifted(&self, by: f64) -> Self {
        Self { samples: self.samples.iter().map(|s| s.shifted(by)).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct FederatedProblem {
    clients: Vec<ClientDataset>,
    smoothness: f64,
    strong_convexity: f64,
    class: ConvexityClass,
    optimum: Option<Vector>,
    optimal_value: Option<f64>,
    /// Half-width of the uncertainty on `optimal_value`; zero when exact.
    optimal_value_tol: f64,
}

impl FederatedProblem {
    /// `smoothness` must bound every sample's gradient Lipschitz constant and
    /// `strong_convexity` must be a valid modulus for `f` (0 if none).
    pub fn new(
        clients: Vec<ClientDataset>,
        smoothness: f64,
        strong_convexity: f64,
        class: ConvexityClass,
    ) -> Result<Self> {
        let first = clients.first().ok_or_else(|| Error::input("problem needs M >= 1 clients"))?;
        let (n, d) = (first.len(), first.dim());
        for c in &clients {
            if c.len() != n {
                return Err(Error::input(format!(
                    "all clients must hold the same number of samples (found {} and {})",
                    n,
                    c.len()
                )));
            }
            if c.dim() != d {
                return Err(Error::Dimension { expected: d, got: c.dim() });
            }
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::input(format!("smoothness L must be positive, got {smoothness}")));
        }
        if !(strong_convexity >= 0.0 && strong_convexity <= smoothness) {
            return Err(Error::input(format!("need 0 <= mu <= L, got mu = {strong_convexity}")));
        }
        if class == ConvexityClass::StronglyConvex && strong_convexity == 0.0 {
            return Err(Error::input("strongly convex problem needs mu > 0"));
        }
        Ok(Self {
            clients,
            smoothness,
            strong_convexity,
            class,
            optimum: None,
            optimal_value: None,
            optimal_value_tol: 0.0,
        })
    }

    /// Attaches a minimizer. `f*` is evaluated there.
    pub fn with_optimum(mut self, x_star: Vector) -> Result<Self> {
        let f_star = self.eval_f(&x_star)?;
        self.optimum = Some(x_star);
        self.optimal_value = Some(f_star);
        Ok(self)
    }

    /// Attaches an (estimated) optimal value with its uncertainty.
    pub fn with_optimal_value(mut self, f_star: f64, tol: f64) -> Self {
        self.optimal_value = Some(f_star);
        self.optimal_value_tol = tol;
        self
    }

    pub fn with_estimated_optimum(self, restarts: usize, tol: f64) -> Result<Self> {
        let est = estimate_f_star(&self, restarts, tol)?;
        let mut out = self.with_optimum(est.minimizer)?;
        out.optimal_value_tol = tol;
        Ok(out)
    }

    pub fn clients(&self) -> &[ClientDataset] {
        &self.clients
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn samples_per_client(&self) -> usize {
        self.clients[0].len()
    }

    pub fn dim(&self) -> usize {
        self.clients[0].dim()
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn class(&self) -> ConvexityClass {
        self.class
    }

    pub fn optimum(&self) -> Option<&Vector> {
        self.optimum.as_ref()
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }

    pub fn optimal_value_tol(&self) -> f64 {
        self.optimal_value_tol
    }

    pub fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `f(x) = (1/M) Σ_m f_m(x)`.
    pub fn eval_f(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.clients.iter().map(|c| c.value(x)).sum::<f64>() / self.clients.len() as f64)
    }

    /// `∇f(x) = (1/M) Σ_m ∇f_m(x)`.
    pub fn grad_f(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        let mut acc = Vector::zeros(x.len());
        for c in &self.clients {
            acc += c.grad(x);
        }
        Ok(acc / self.clients.len() as f64)
    }

    /// The same problem with every sample loss shifted by `by`.
    pub fn shifted(&self, by: f64) -> Self {
        Self {
            clients: self.clients.iter().map(|c| c.shifted(by)).collect(),
            optimal_value: self.optimal_value.map(|f| f + by),
            ..self.clone()
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.clients.iter().all(|c| c.samples().iter().all(|s| s.as_quadratic().is_some()))
    }
}
