use nalgebra::{DMatrix, SymmetricEigen};

use super::Vector;
use crate::error::{Error, Result};

/// One summand `f^i_m` of a client's local objective.
///
/// Every loss carries an additive `shift`, which moves values and infima but
/// leaves gradients untouched.
#[derive(Clone, Debug)]
pub struct SampleLoss {
    kind: LossKind,
    shift: f64,
}

#[derive(Clone, Debug)]
pub enum LossKind {
    /// `½ (x − c)ᵀ A (x − c)` with symmetric positive semidefinite `A`.
    Quadratic {
        hessian: DMatrix<f64>,
        center: Vector,
        /// `A c`, cached so the gradient is one matrix-vector product.
        hessian_center: Vector,
        max_eigenvalue: f64,
        min_eigenvalue: f64,
    },
    /// `log(1 + exp(−y aᵀx)) + (λ/2)‖x‖²`.
    Logistic { features: Vector, label: f64, l2: f64 },
    /// `ℓ(aᵀx − b)` with `ℓ(s) = s² / (1 + s²)`: smooth, bounded, nonconvex.
    Rational { direction: Vector, offset: f64 },
}

impl SampleLoss {
    pub fn quadratic(hessian: DMatrix<f64>, center: Vector) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::input("quadratic loss needs d >= 1"));
        }
        if hessian.nrows() != d || hessian.ncols() != d {
            return Err(Error::Dimension { expected: d, got: hessian.nrows() });
        }
        if hessian.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("quadratic loss has non-finite entries"));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::input("quadratic hessian is not symmetric"));
        }
        let eig = SymmetricEigen::new(hessian.clone());
        let max_eigenvalue = eig.eigenvalues.max();
        let min_eigenvalue = eig.eigenvalues.min();
        if min_eigenvalue < -1e-12 * (1.0 + max_eigenvalue.abs()) {
            return Err(Error::input(format!(
                "quadratic hessian is not PSD (min eigenvalue {min_eigenvalue})"
            )));
        }
        let hessian_center = &hessian * &center;
        Ok(Self {
            kind: LossKind::Quadratic { hessian, center, hessian_center, max_eigenvalue, min_eigenvalue },
            shift: 0.0,
        })
    }

    /// Scalar quadratic `(a/2)(x − c)²`.
    pub fn quadratic_1d(curvature: f64, center: f64) -> Result<Self> {
        Self::quadratic(DMatrix::from_element(1, 1, curvature), Vector::from_element(1, center))
    }

    pub fn logistic(features: Vector, label: f64, l2: f64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::input("logistic loss needs d >= 1"));
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::input(format!("logistic label must be ±1, got {label}")));
        }
        if !(l2 >= 0.0 && l2.is_finite()) || features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("logistic loss has invalid parameters"));
        }
        Ok(Self { kind: LossKind::Logistic { features, label, l2 }, shift: 0.0 })
    }

    pub fn rational(direction: Vector, offset: f64) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::input("rational loss needs d >= 1"));
        }
        if !offset.is_finite() || direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("rational loss has non-finite parameters"));
        }
        Ok(Self { kind: LossKind::Rational { direction, offset }, shift: 0.0 })
    }

    /// The same loss plus a constant.
    pub fn shifted(&self, by: f64) -> Self {
        Self { kind: self.kind.clone(), shift: self.shift + by }
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::Quadratic { center, .. } => center.len(),
            LossKind::Logistic { features, .. } => features.len(),
            LossKind::Rational { direction, .. } => direction.len(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let raw = match &self.kind {
            LossKind::Quadratic { hessian, center, .. } => {
                let r = x - center;
                0.5 * r.dot(&(hessian * &r))
            }
            LossKind::Logistic { features, label, l2 } => {
                let margin = label * features.dot(x);
                softplus(-margin) + 0.5 * l2 * x.norm_squared()
            }
            LossKind::Rational { direction, offset } => {
                let s = direction.dot(x) - offset;
                let s2 = s * s;
                s2 / (1.0 + s2)
            }
        };
        raw + self.shift
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        self.grad_into(x, &mut out);
        out
    }

    /// Writes `∇f(x)` into `out`, which must already have length `d`.
    pub fn grad_into(&self, x: &Vector, out: &mut Vector) {
        match &self.kind {
            LossKind::Quadratic { hessian, hessian_center, .. } => {
                out.gemv(1.0, hessian, x, 0.0);
                *out -= hessian_center;
            }
            LossKind::Logistic { features, label, l2 } => {
                let margin = label * features.dot(x);
                // d/dx softplus(−y aᵀx) = −y σ(−y aᵀx) a
                let weight = -label * sigmoid(-margin);
                out.copy_from(x);
                *out *= *l2;
                out.axpy(weight, features, 1.0);
            }
            LossKind::Rational { direction, offset } => {
                let s = direction.dot(x) - offset;
                let denom = 1.0 + s * s;
                out.copy_from(direction);
                *out *= 2.0 * s / (denom * denom);
            }
        }
    }

    /// A valid Lipschitz constant of the gradient, when known in closed form.
    pub fn smoothness(&self) -> Option<f64> {
        match &self.kind {
            LossKind::Quadratic { max_eigenvalue, .. } => Some(*max_eigenvalue),
            LossKind::Logistic { features, l2, .. } => Some(0.25 * features.norm_squared() + l2),
            // |ℓ''(s)| = |2 − 6s²| / (1 + s²)³ ≤ 2
            LossKind::Rational { direction, .. } => Some(2.0 * direction.norm_squared()),
        }
    }

    pub fn strong_convexity(&self) -> Option<f64> {
        match &self.kind {
            LossKind::Quadratic { min_eigenvalue, .. } => Some(min_eigenvalue.max(0.0)),
            LossKind::Logistic { l2, .. } => Some(*l2),
            LossKind::Rational { .. } => None,
        }
    }

    /// `inf_x f(x)`, computed analytically.
    pub fn infimum(&self) -> Option<f64> {
        let raw = match &self.kind {
            LossKind::Quadratic { .. } => 0.0,
            LossKind::Logistic { features, label, l2 } => {
                let q = features.norm_squared();
                if q == 0.0 {
                    std::f64::consts::LN_2
                } else if *l2 == 0.0 {
                    0.0
                } else {
                    let t = logistic_ray_minimizer(q, *label, *l2);
                    softplus(-label * t * q) + 0.5 * l2 * t * t * q
                }
            }
            LossKind::Rational { direction, offset } => {
                if direction.norm_squared() == 0.0 {
                    offset * offset / (1.0 + offset * offset)
                } else {
                    0.0
                }
            }
        };
        Some(raw + self.shift)
    }

    /// A point attaining the infimum, when one exists.
    pub fn minimizer(&self) -> Option<Vector> {
        match &self.kind {
            LossKind::Quadratic { center, .. } => Some(center.clone()),
            LossKind::Logistic { features, label, l2 } => {
                let q = features.norm_squared();
                if q == 0.0 {
                    Some(Vector::zeros(features.len()))
                } else if *l2 == 0.0 {
                    None
                } else {
                    Some(features * logistic_ray_minimizer(q, *label, *l2))
                }
            }
            LossKind::Rational { direction, offset } => {
                let q = direction.norm_squared();
                if q == 0.0 {
                    Some(Vector::zeros(direction.len()))
                } else {
                    Some(direction * (offset / q))
                }
            }
        }
    }

    pub fn as_quadratic(&self) -> Option<(&DMatrix<f64>, &Vector)> {
        match &self.kind {
            LossKind::Quadratic { hessian, center, .. } => Some((hessian, center)),
            _ => None,
        }
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{−z})` without overflow.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The regularized logistic minimizer lies on the ray `t·a`; the stationarity
/// condition `λt = y σ(−y t ‖a‖²)` has a unique root in `[−1/λ, 1/λ]`.
fn logistic_ray_minimizer(q: f64, label: f64, l2: f64) -> f64 {
    let phi = |t: f64| l2 * t - label * sigmoid(-label * t * q);
    let (mut lo, mut hi) = (-1.0 / l2, 1.0 / l2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
