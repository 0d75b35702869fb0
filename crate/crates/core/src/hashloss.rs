//! Pairwise label similarity and the relaxed hashing objective.
//!
//! For a minibatch of `m` samples with network outputs `F` (`L × m`),
//! auxiliary binary codes `B` (`L × m`) and label similarity `S` (`m × m`):
//!
//! ```text
//! J = α/(2m²) ‖FᵀF/L − S‖²      similarity
//!   + β/(2m)  ‖F − B‖²          quantization
//!   + θ/2     ‖FFᵀ/m − I_L‖²    bit independence
//!   + γ/2     ‖F·1/m‖²          bit balance
//! ```
//!
//! All norms are Frobenius. The per-term batch scalings make the weights
//! independent of the batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Weights of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Similarity preservation.
    pub alpha: f64,
    /// Quantization toward the auxiliary codes.
    pub beta: f64,
    /// Bit independence.
    pub theta: f64,
    /// Bit balance.
    pub gamma: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.01,
            beta: 0.01,
            theta: 0.001,
            gamma: 0.01,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "hyperparameter {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The four weighted terms of the objective, individually.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub similarity: f64,
    pub quantization: f64,
    pub independence: f64,
    pub balance: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.similarity + self.quantization + self.independence + self.balance
    }
}

/// `S[i][j] = +1` when `labels_a[i] == labels_b[j]`, otherwise `−1`.
pub fn similarity_matrix(labels_a: &[u32], labels_b: &[u32]) -> Result<Matrix> {
    if labels_a.is_empty() || labels_b.is_empty() {
        return Err(Error::invalid(
            "similarity_matrix needs non-empty label lists",
        ));
    }
    Ok(Matrix::from_fn(labels_a.len(), labels_b.len(), |i, j| {
        if labels_a[i] == labels_b[j] {
            1.0
        } else {
            -1.0
        }
    }))
}

fn check_shapes(f: &Matrix, b: &Matrix, s: &Matrix) -> Result<()> {
    let (l, m) = f.shape();
    if l == 0 || m == 0 {
        return Err(Error::invalid("code matrix must be non-empty"));
    }
    if b.shape() != (l, m) {
        return Err(Error::invalid(format!(
            "binary codes are {}x{}, network outputs are {l}x{m}",
            b.rows(),
            b.cols()
        )));
    }
    if s.shape() != (m, m) {
        return Err(Error::invalid(format!(
            "similarity matrix is {}x{}, expected {m}x{m}",
            s.rows(),
            s.cols()
        )));
    }
    Ok(())
}

/// Residuals shared by the loss and its gradient.
struct Residuals {
    /// `FᵀF/L − S`, `m × m`
    sim: Matrix,
    /// `FFᵀ/m − I`, `L × L`
    cov: Matrix,
    /// `F·1/m`, length `L`
    mean: Vec<f64>,
}

fn residuals(f: &Matrix, s: &Matrix) -> Residuals {
    let (l, m) = f.shape();
    let sim = f.t_matmul(f).scale(1.0 / l as f64).sub(s);
    let cov = f
        .matmul_t(f)
        .scale(1.0 / m as f64)
        .sub(&Matrix::identity(l));
    let mean = f.row_sums().into_iter().map(|v| v / m as f64).collect();
    Residuals { sim, cov, mean }
}

/// Evaluates each weighted term of the objective.
pub fn loss_terms(f: &Matrix, b: &Matrix, s: &Matrix, h: &Hyperparams) -> Result<LossTerms> {
    check_shapes(f, b, s)?;
    let m = f.cols() as f64;
    let r = residuals(f, s);
    Ok(LossTerms {
        similarity: h.alpha / (2.0 * m * m) * r.sim.frobenius_sq(),
        quantization: h.beta / (2.0 * m) * f.sub(b).frobenius_sq(),
        independence: h.theta / 2.0 * r.cov.frobenius_sq(),
        balance: h.gamma / 2.0 * r.mean.iter().map(|v| v * v).sum::<f64>(),
    })
}

pub fn loss(f: &Matrix, b: &Matrix, s: &Matrix, h: &Hyperparams) -> Result<f64> {
    loss_terms(f, b, s, h).map(|t| t.total())
}

/// `∂J/∂F`, an `L × m` matrix.
///
/// ```text
/// ∂J/∂F = α/(m²L) · F(M + Mᵀ) + β/m · (F − B) + 2θ/m · C F + γ/m² · F 1 1ᵀ
/// ```
///
/// with `M = FᵀF/L − S` and `C = FFᵀ/m − I`. For symmetric `S` the first
/// term is `2α/(m²L) · F M`.
pub fn loss_grad(f: &Matrix, b: &Matrix, s: &Matrix, h: &Hyperparams) -> Result<Matrix> {
    check_shapes(f, b, s)?;
    let (l, m) = f.shape();
    let (lf, mf) = (l as f64, m as f64);
    let r = residuals(f, s);

    let sim_sym = r.sim.add(&r.sim.transpose());
    let mut grad = f.matmul(&sim_sym).scale(h.alpha / (mf * mf * lf));
    grad.axpy(h.beta / mf, &f.sub(b));
    grad.axpy(2.0 * h.theta / mf, &r.cov.matmul(f));
    // F 1 1ᵀ / m² = mean · 1ᵀ / m
    let bal = h.gamma / mf;
    for (i, &mu) in r.mean.iter().enumerate() {
        for g in grad.row_mut(i) {
            *g += bal * mu;
        }
    }
    Ok(grad)
}
