//! Alternating optimization of the hashing network.
//!
//! Outer iteration `k` holds the auxiliary codes `B` fixed while `T`
//! minibatch SGD steps update the network; afterwards `B` is replaced by the
//! sign of the network outputs over the whole training set.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashloss::{loss_grad, loss_terms, similarity_matrix, Hyperparams, LossTerms};
use crate::index::binarize;
use crate::network::{head_spec_for, Gradients, Network, SgdConfig};
use crate::numerics::Matrix;
use crate::pretrain::{pca_fit, ItqEncoder, DEFAULT_DR_DIM, DEFAULT_ITQ_ITERS};

pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_OUTER: usize = 5;

/// A batch loss above this multiple of the first batch loss aborts training.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSchedule {
    /// Outer iterations `K` (code updates).
    pub outer: usize,
    /// Inner SGD steps `T` per outer iteration.
    pub inner: usize,
    /// Minibatch size `m`.
    pub batch: usize,
    pub seed: u64,
}

/// `K = 5`, `T = ⌈4n/m⌉`.
pub fn default_schedule(n: usize, batch: usize) -> Result<TrainSchedule> {
    if batch == 0 || batch > n {
        return Err(Error::invalid(format!(
            "batch size must be in 1..={n}, got {batch}"
        )));
    }
    Ok(TrainSchedule {
        outer: DEFAULT_OUTER,
        inner: (4 * n).div_ceil(batch),
        batch,
        seed: 0,
    })
}

/// Sample-major features with one class id per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    /// `n × d`
    pub features: Matrix,
    pub labels: Vec<u32>,
}

impl LabeledFeatures {
    pub fn new(features: Matrix, labels: Vec<u32>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(LabeledFeatures { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub bits: usize,
    /// Width of the PCA layer; `None` means `min(800, d)`.
    pub dr_dim: Option<usize>,
    pub hyper: Hyperparams,
    pub schedule: TrainSchedule,
    pub sgd: SgdConfig,
    pub itq_iters: usize,
}

impl TrainConfig {
    /// Defaults for `n` samples and `bits`-bit codes.
    pub fn new(n: usize, bits: usize) -> Result<Self> {
        Ok(TrainConfig {
            bits,
            dr_dim: None,
            hyper: Hyperparams::default(),
            schedule: default_schedule(n, DEFAULT_BATCH.min(n))?,
            sgd: SgdConfig::default(),
            itq_iters: DEFAULT_ITQ_ITERS,
        })
    }

    pub fn resolved_dr_dim(&self, d: usize) -> usize {
        self.dr_dim.unwrap_or(DEFAULT_DR_DIM.min(d))
    }
}

/// One minibatch step: outer index `k` and inner index `t`, both from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub outer: usize,
    pub inner: usize,
    pub terms: LossTerms,
}

impl BatchRecord {
    pub fn total(&self) -> f64 {
        self.terms.total()
    }

    /// `k t total similarity quantization independence balance`
    pub fn log_line(&self) -> String {
        let t = &self.terms;
        format!(
            "{} {} {:e} {:e} {:e} {:e} {:e}",
            self.outer,
            self.inner,
            t.total(),
            t.similarity,
            t.quantization,
            t.independence,
            t.balance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub network: Network,
    /// Auxiliary codes `B`, `L × n`.
    pub codes: Matrix,
    /// Completed outer iterations.
    pub outer: usize,
    /// Completed inner steps within the last outer iteration.
    pub inner: usize,
    pub history: Vec<BatchRecord>,
}

impl TrainState {
    /// Mean batch loss of outer iteration `k` (from 1).
    pub fn mean_loss(&self, k: usize) -> Option<f64> {
        let losses: Vec<f64> = self
            .history
            .iter()
            .filter(|r| r.outer == k)
            .map(|r| r.total())
            .collect();
        (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64)
    }
}

/// Seeded epoch shuffler: consumes a permutation in chunks of `batch`,
/// reshuffling when exhausted. The final chunk of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        BatchSampler {
            order,
            pos: 0,
            batch,
            rng,
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// `sign(f(W, X))` for sample-major `x`, computed in column blocks of at
/// most `block` samples. Returns `L × n`.
pub fn update_codes(network: &Network, x: &Matrix, block: usize) -> Result<Matrix> {
    network_outputs(network, x, block).map(|f| binarize(&f))
}

/// Network outputs `F` (`L × n`) for sample-major `x`, in blocks.
pub fn network_outputs(network: &Network, x: &Matrix, block: usize) -> Result<Matrix> {
    if block == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    if x.cols() != network.input_dim() {
        return Err(Error::invalid(format!(
            "features have {} columns, network expects {}",
            x.cols(),
            network.input_dim()
        )));
    }
    let n = x.rows();
    let mut out = Matrix::zeros(network.code_length(), n);
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let ids: Vec<usize> = (start..end).collect();
        let f = network.predict(&x.select_rows(&ids).transpose())?;
        for j in 0..out.rows() {
            out.row_mut(j)[start..end].copy_from_slice(f.row(j));
        }
        start = end;
    }
    Ok(out)
}

/// `‖F − B‖² / (L·n)`
pub fn quantization_gap(f: &Matrix, b: &Matrix) -> f64 {
    f.sub(b).frobenius_sq() / (f.rows() * f.cols()) as f64
}

/// Runs the full training procedure; see [`train_with`].
pub fn train(data: &LabeledFeatures, cfg: &TrainConfig) -> Result<TrainState> {
    train_with(data, cfg, |_| {})
}

/// Trains and reports every batch record to `on_batch` as it happens.
///
/// 1. DR layer from PCA of the features, head initialized at random.
/// 2. `B⁰` from ITQ on the top-`L` PCA projection.
/// 3. For each outer iteration, `T` SGD steps on shuffled minibatches with
///    `B` fixed, then `B ← sign(F)` over all samples.
pub fn train_with(
    data: &LabeledFeatures,
    cfg: &TrainConfig,
    mut on_batch: impl FnMut(&BatchRecord),
) -> Result<TrainState> {
    let n = data.len();
    let d = data.dim();
    let sched = cfg.schedule;
    if cfg.bits == 0 {
        return Err(Error::invalid("code length must be at least 1"));
    }
    if sched.outer == 0 || sched.inner == 0 {
        return Err(Error::invalid(
            "outer and inner iteration counts must be at least 1",
        ));
    }
    if sched.batch == 0 || sched.batch > n {
        return Err(Error::invalid(format!(
            "batch size must be in 1..={n}, got {}",
            sched.batch
        )));
    }
    if data.num_classes() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    if !data.features.all_finite() {
        return Err(Error::invalid("features contain non-finite values"));
    }
    cfg.hyper.validate()?;
    cfg.sgd.validate()?;
    let dr_dim = cfg.resolved_dr_dim(d);

    let mut seeds = ChaCha8Rng::seed_from_u64(sched.seed);
    let init_seed = seeds.next_u64();
    let itq_seed = seeds.next_u64();
    let shuffle_seed = seeds.next_u64();

    let pca = pca_fit(&data.features, dr_dim)?;
    let head = head_spec_for(cfg.bits)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut network = Network::hashing(pca.dr_layer(), head, &mut init_rng)?;

    let itq = ItqEncoder::fit(&data.features, cfg.bits, cfg.itq_iters, itq_seed)?;
    let mut codes = itq.encode(&data.features)?;

    let mut velocity = Gradients::zeros_like(&network);
    let mut sampler = BatchSampler::new(n, sched.batch, shuffle_seed);
    let mut history = Vec::with_capacity(sched.outer * sched.inner);
    let mut first_loss: Option<f64> = None;

    for k in 1..=sched.outer {
        for t in 1..=sched.inner {
            let ids = sampler.next_batch();
            let labels: Vec<u32> = ids.iter().map(|&i| data.labels[i]).collect();
            let s = similarity_matrix(&labels, &labels)?;
            let b = codes.select_columns(&ids);
            let x = data.features.select_rows(&ids).transpose();

            let tape = network.forward(&x)?;
            let f = tape.output();
            let terms = loss_terms(f, &b, &s, &cfg.hyper)?;
            let total = terms.total();
            let first = *first_loss.get_or_insert(total);
            if !total.is_finite() || (first > 0.0 && total > DIVERGENCE_FACTOR * first) {
                return Err(Error::Divergence {
                    outer: k,
                    inner: t,
                    loss: total,
                });
            }
            let record = BatchRecord {
                outer: k,
                inner: t,
                terms,
            };
            on_batch(&record);
            history.push(record);

            let d_out = loss_grad(f, &b, &s, &cfg.hyper)?;
            let grads = network.backward(&tape, &d_out)?;
            network.sgd_step(&grads, &cfg.sgd, &mut velocity)?;
        }
        codes = update_codes(&network, &data.features, sched.batch)?;
    }

    Ok(TrainState {
        network,
        codes,
        outer: sched.outer,
        inner: sched.inner,
        history,
    })
}
