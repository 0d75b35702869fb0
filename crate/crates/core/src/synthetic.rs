//! Seeded Gaussian-mixture datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::trainer::LabeledFeatures;

/// Isotropic Gaussian clusters with well-separated centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    /// `classes × dim`
    pub centers: Matrix,
    pub sigma: f64,
}

impl Mixture {
    /// Draws `classes` centers in `dim` dimensions whose pairwise distances
    /// are all at least `min_separation · sigma`.
    ///
    /// Centers are drawn from `N(0, s²I)` with `s` chosen so that the
    /// expected pairwise distance equals the requirement; draws that come
    /// too close to an accepted center are rejected. Most pairs therefore
    /// sit near the minimum separation.
    pub fn well_separated(
        classes: usize,
        dim: usize,
        sigma: f64,
        min_separation: f64,
        seed: u64,
    ) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::invalid(
                "mixture needs at least one class and dimension",
            ));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::invalid("sigma must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_dist = min_separation * sigma;
        // E‖a − b‖ ≈ s·√(2·dim)
        let spread = min_dist / (2.0 * dim as f64).sqrt();
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
        let mut attempts = 0;
        while centers.len() < classes {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::invalid(
                    "could not place well-separated centers; increase dim or lower separation",
                ));
            }
            let scale = if dim == 1 {
                min_dist * classes as f64
            } else {
                spread
            };
            let c: Vec<f64> = (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect();
            let ok = centers.iter().all(|o| {
                o.iter()
                    .zip(&c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    >= min_dist
            });
            if ok {
                centers.push(c);
            }
        }
        Ok(Mixture {
            centers: Matrix::from_rows(&centers)?,
            sigma,
        })
    }

    pub fn classes(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    /// `n` samples with labels drawn uniformly at random.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledFeatures {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            let label = rng.random_range(0..self.classes());
            labels.push(label as u32);
            for &c in self.centers.row(label) {
                let noise: f64 = StandardNormal.sample(&mut rng);
                data.push(c + self.sigma * noise);
            }
        }
        let features = Matrix::new(n, self.dim(), data).expect("sizes agree");
        LabeledFeatures::new(features, labels).expect("one label per row")
    }
}
