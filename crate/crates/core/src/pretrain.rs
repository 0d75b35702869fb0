//! Initialization: PCA for the dimension-reduction layer and iterative
//! quantization (ITQ) for the starting binary codes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::index::binarize;
use crate::network::{Activation, Layer};
use crate::numerics::{procrustes_rotation, sym_eig, Matrix, SYM_EIG_TOL};

/// Default width of the dimension-reduction layer.
pub const DEFAULT_DR_DIM: usize = 800;

pub const DEFAULT_ITQ_ITERS: usize = 50;

/// Top principal directions of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `p × d`, rows are unit eigenvectors of the covariance.
    pub projection: Matrix,
    pub mean: Vec<f64>,
    /// Descending, length `p`.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.rows()
    }

    /// `−W·mean`, the bias that centers the projection.
    pub fn bias(&self) -> Vec<f64> {
        (0..self.output_dim())
            .map(|r| {
                -self
                    .projection
                    .row(r)
                    .iter()
                    .zip(&self.mean)
                    .map(|(w, m)| w * m)
                    .sum::<f64>()
            })
            .collect()
    }

    /// The dimension-reduction layer `x ↦ W·x + b` with identity activation.
    pub fn dr_layer(&self) -> Layer {
        Layer::new(self.projection.clone(), self.bias(), Activation::Identity)
            .expect("bias length equals projection rows")
    }

    /// Projects sample-major `x` (`n × d`) to `n × p` centered coordinates.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "features have {} columns, PCA model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let centered = center(x, &self.mean);
        Ok(centered.matmul_t(&self.projection))
    }
}

fn center(x: &Matrix, mean: &[f64]) -> Matrix {
    let mut c = x.clone();
    for r in 0..c.rows() {
        for (v, m) in c.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    c
}

/// Fits PCA to sample-major `x` (`n × d`), keeping `p` components.
///
/// The covariance uses divisor `n − 1`.
pub fn pca_fit(x: &Matrix, p: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if p == 0 || p > d {
        return Err(Error::invalid(format!(
            "PCA output dimension must be in 1..={d}, got {p}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = center(x, &mean);
    let mut cov = centered.t_matmul(&centered).scale(1.0 / (n - 1) as f64);
    // Exact symmetry for the eigensolver.
    for r in 0..d {
        for c in r + 1..d {
            let v = 0.5 * (cov[(r, c)] + cov[(c, r)]);
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    let eig = sym_eig(&cov, SYM_EIG_TOL)?;
    let projection = Matrix::from_fn(p, d, |r, c| eig.vectors[(c, r)]);
    let eigenvalues = eig.values[..p].iter().map(|&v| v.max(0.0)).collect();
    Ok(PcaModel {
        projection,
        mean,
        eigenvalues,
    })
}

/// Result of iterative quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct ItqResult {
    /// Orthogonal `L × L`.
    pub rotation: Matrix,
    /// `L × n`, entries ±1.
    pub codes: Matrix,
    /// Quantization error `‖B − V·R‖²` after each iteration.
    pub objective_trace: Vec<f64>,
}

/// Seeded random orthogonal matrix: Gram–Schmidt on a standard-normal draw.
pub fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        if let Some(q) = gram_schmidt_columns(&g) {
            return q;
        }
    }
}

fn gram_schmidt_columns(a: &Matrix) -> Option<Matrix> {
    let n = a.cols();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v = a.column(c);
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    Some(Matrix::from_fn(a.rows(), n, |r, c| cols[c][r]))
}

/// ITQ from a seeded random orthogonal start.
///
/// `v` is `n × L`: centered, PCA-projected samples as rows.
pub fn itq(v: &Matrix, iters: usize, seed: u64) -> Result<ItqResult> {
    itq_from(v, iters, random_orthogonal(v.cols(), seed))
}

/// ITQ from a given starting rotation.
///
/// Each iteration sets `B = sign(V·R)` and then `R = procrustes(VᵀB)`; both
/// steps minimize `‖B − V·R‖²` over one variable, so the recorded objective
/// never increases. The returned codes are `sign(V·R)` for the final `R`.
pub fn itq_from(v: &Matrix, iters: usize, initial: Matrix) -> Result<ItqResult> {
    let (n, l) = v.shape();
    if l == 0 {
        return Err(Error::invalid("ITQ needs at least one bit"));
    }
    if l > n {
        return Err(Error::invalid(format!(
            "ITQ needs at least as many samples as bits ({n} < {l})"
        )));
    }
    if iters == 0 {
        return Err(Error::invalid("ITQ needs at least one iteration"));
    }
    if initial.shape() != (l, l) {
        return Err(Error::invalid("initial rotation has the wrong shape"));
    }
    if !v.all_finite() {
        return Err(Error::invalid("ITQ input has non-finite entries"));
    }

    let mut rotation = initial;
    let mut objective_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let b = binarize(&v.matmul(&rotation));
        rotation = procrustes_rotation(&v.t_matmul(&b))?;
        objective_trace.push(b.sub(&v.matmul(&rotation)).frobenius_sq());
    }
    let codes = binarize(&v.matmul(&rotation)).transpose();
    Ok(ItqResult {
        rotation,
        codes,
        objective_trace,
    })
}

/// PCA to `bits` dimensions followed by an ITQ rotation; encodes unseen data.
#[derive(Debug, Clone, PartialEq)]
pub struct ItqEncoder {
    pub pca: PcaModel,
    pub rotation: Matrix,
    pub objective_trace: Vec<f64>,
}

impl ItqEncoder {
    /// Fits on sample-major `x` (`n × d`).
    pub fn fit(x: &Matrix, bits: usize, iters: usize, seed: u64) -> Result<Self> {
        if x.rows() < bits {
            return Err(Error::invalid(format!(
                "ITQ needs at least as many samples as bits ({} < {bits})",
                x.rows()
            )));
        }
        let pca = pca_fit(x, bits)?;
        let v = pca.transform(x)?;
        let res = itq(&v, iters, seed)?;
        Ok(ItqEncoder {
            pca,
            rotation: res.rotation,
            objective_trace: res.objective_trace,
        })
    }

    /// `L × n` codes for sample-major `x`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let v = self.pca.transform(x)?;
        Ok(binarize(&v.matmul(&self.rotation)).transpose())
    }
}

/// Initial auxiliary codes `B⁰` (`L × n`): ITQ on the top-`bits` PCA
/// projection of `x`, 50 iterations.
pub fn init_binary_codes(x: &Matrix, bits: usize, seed: u64) -> Result<Matrix> {
    let enc = ItqEncoder::fit(x, bits, DEFAULT_ITQ_ITERS, seed)?;
    enc.encode(x)
}
