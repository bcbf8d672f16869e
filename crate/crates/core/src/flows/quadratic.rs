use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::HyperParams;
use crate::oscillator::{homogeneous, OscillatorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticModel {
    /// Discrete gradient descent iterate at step `⌊t/η⌋`.
    GdTrajectory,
    GradientFlow,
    ModifiedLossFlow,
    MomentumFlow,
    ModifiedMomentumFlow,
}

/// Exact trajectories of `L(w) = ½ wᵀ A w` (plus `λ/2 |w|²` when `λ > 0`).
#[derive(Debug, Clone)]
pub struct QuadraticSystem {
    a: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl QuadraticSystem {
    /// `a` is row-major `n × n`, symmetric positive definite.
    pub fn new(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n * n || n == 0 {
            return Err(Error::Shape(format!("expected a {n}x{n} matrix, got {} entries", a.len())));
        }
        let m = DMatrix::from_row_slice(n, n, a);
        let asym = (&m - m.transpose()).abs().max();
        if asym > 1e-12 * m.abs().max().max(1.0) {
            return Err(Error::InvalidArgument("quadratic matrix is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(m.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "quadratic matrix is not positive definite (eigenvalues {:?})",
                eig.eigenvalues.as_slice()
            )));
        }
        Ok(Self { a: m, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().copied().collect()
    }

    /// Applies a scalar map per eigen-direction: `S f(Λ) Sᵀ w0`.
    fn spectral(&self, w0: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let w = DVector::from_column_slice(w0);
        let coeffs = self.eigenvectors.transpose() * w;
        let scaled = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(self.eigenvalues.iter()).map(|(c, &l)| c * f(l)),
        );
        (&self.eigenvectors * scaled).iter().copied().collect()
    }

    pub fn state(&self, w0: &[f64], hyper: &HyperParams, t: f64, model: QuadraticModel) -> Result<Vec<f64>> {
        if w0.len() != self.dim() {
            return Err(Error::Shape(format!("w0 has length {}, system is {}-dimensional", w0.len(), self.dim())));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        hyper.validate()?;
        let HyperParams { eta, lambda, alpha, beta, .. } = *hyper;
        Ok(match model {
            QuadraticModel::GdTrajectory => {
                if !(eta > 0.0) {
                    return Err(Error::InvalidArgument("gradient descent needs eta > 0".into()));
                }
                let steps = (t / eta + 1e-9).floor() as usize;
                let mut w = DVector::from_column_slice(w0);
                for _ in 0..steps {
                    let g = &self.a * &w + lambda * &w;
                    w -= eta * g;
                }
                w.iter().copied().collect()
            }
            QuadraticModel::GradientFlow => self.spectral(w0, |l| (-(l + lambda) * t).exp()),
            QuadraticModel::ModifiedLossFlow => self.spectral(w0, |l| {
                let mu = l + lambda;
                (-(mu + 0.5 * eta * mu * mu) * t).exp()
            }),
            QuadraticModel::MomentumFlow => self.spectral(w0, |l| (-(l + lambda) * t / (1.0 - beta)).exp()),
            QuadraticModel::ModifiedMomentumFlow => {
                let m = eta * (1.0 - alpha) * (1.0 + beta);
                if !(m > 0.0) {
                    return Err(Error::InvalidArgument("modified momentum flow needs eta > 0".into()));
                }
                let gamma = (1.0 - beta) / m;
                self.spectral(w0, |l| {
                    let omega = (2.0 * (l + lambda) / m).sqrt();
                    homogeneous(OscillatorParams { gamma, omega }, 1.0, t)
                })
            }
        })
    }
}

/// The 2×2 demo matrix used in the discretization figures.
pub const DEMO_MATRIX: [f64; 4] = [2.5, -1.5, -1.5, 2.0];

/// Exact state of `model` at time `t` on `L = ½ wᵀ A w`.
pub fn quadratic_exact(
    n: usize,
    a: &[f64],
    w0: &[f64],
    hyper: &HyperParams,
    t: f64,
    model: QuadraticModel,
) -> Result<Vec<f64>> {
    QuadraticSystem::new(n, a)?.state(w0, hyper, t, model)
}
