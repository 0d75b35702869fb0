//! The hashing network: a PCA-initialized dimension-reduction layer with
//! identity activation, two sigmoid hidden layers and a scaled-sigmoid
//! output layer producing codes in `(−1, 1)`.
//!
//! Samples are columns: inputs are `d × m`, outputs `L × m`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    /// `2·sigmoid(z) − 1`, range `(−1, 1)`.
    ScaledSigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::ScaledSigmoid => 2.0 * sigmoid(z) - 1.0,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::ScaledSigmoid => 0.5 * (1.0 - a * a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::ScaledSigmoid => "scaled_sigmoid",
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer, `out = act(W·in + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out_dim × in_dim`
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::invalid(format!(
                "bias has {} entries, weights have {} rows",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform `[−a, a]` weights with `a = √(6 / (fan_in + fan_out))`, zero bias.
    pub fn random<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Matrix::from_fn(out_dim, in_dim, |_, _| rng.random_range(-a..=a));
        Layer {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let mut z = self.weights.matmul(input);
        for (r, &b) in self.bias.iter().enumerate() {
            z.row_mut(r).iter_mut().for_each(|v| *v += b);
        }
        let a = z.map(|v| self.activation.apply(v));
        (z, a)
    }
}

/// Hidden layer widths of the hashing head for a given code length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub code_length: usize,
    pub hidden: (usize, usize),
}

/// Head sizes for code length `bits`.
///
/// The tabulated lengths 8, 16, 24, 32 and 48 use their fixed widths; any
/// other length uses `(max(90, 2L + 40), max(20, ⌈1.6 L⌉))`.
pub fn head_spec_for(bits: usize) -> Result<HeadSpec> {
    let hidden = match bits {
        0 => return Err(Error::invalid("code length must be at least 1")),
        8 => (90, 20),
        16 => (90, 30),
        24 => (100, 40),
        32 => (120, 50),
        48 => (140, 80),
        l => ((2 * l + 40).max(90), (16 * l).div_ceil(10).max(20)),
    };
    Ok(HeadSpec {
        code_length: bits,
        hidden,
    })
}

/// Ordered layers of the hashing network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Everything `forward` saw, for `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `pre_activations[i] = W_i · activations[i] + b_i`
    pub pre_activations: Vec<Matrix>,
    /// `activations[0]` is the input; `activations[i + 1]` is layer `i`'s output.
    pub activations: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.activations
            .last()
            .expect("tape always holds the input")
    }
}

/// Per-layer parameter gradients (also used as the momentum buffer).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].shape() == l.weights.shape() && self.biases[i].len() == l.out_dim()
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-4,
            weight_decay: 5e-4,
            momentum: 0.9,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "weight decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

impl Network {
    /// Checks that consecutive layers chain and the last layer emits codes
    /// through `scaled_sigmoid`.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::invalid("network needs at least one layer"))?;
        if last.activation != Activation::ScaledSigmoid {
            return Err(Error::invalid(format!(
                "output layer must use scaled_sigmoid, got {}",
                last.activation.name()
            )));
        }
        Self::from_layers_unchecked(layers)
    }

    /// Like [`Network::new`] but accepts any output activation. Useful for
    /// tests and for inspecting intermediate representations.
    pub fn from_layers_unchecked(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::invalid(format!("layer {i}: bias length mismatch")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Network { layers })
    }

    /// DR layer followed by a randomly initialized head sized by `head`.
    pub fn hashing<R: Rng + ?Sized>(dr: Layer, head: HeadSpec, rng: &mut R) -> Result<Self> {
        let p = dr.out_dim();
        let (h1, h2) = head.hidden;
        let layers = vec![
            dr,
            Layer::random(p, h1, Activation::Sigmoid, rng),
            Layer::random(h1, h2, Activation::Sigmoid, rng),
            Layer::random(h2, head.code_length, Activation::ScaledSigmoid, rng),
        ];
        Network::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn code_length(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Runs `x` (`d × m`) through every layer.
    pub fn forward(&self, x: &Matrix) -> Result<Tape> {
        if x.rows() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.rows(),
                self.input_dim()
            )));
        }
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let (z, a) = layer.forward(activations.last().unwrap());
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(Tape {
            pre_activations,
            activations,
        })
    }

    /// Network outputs only.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.rows(),
                self.input_dim()
            )));
        }
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a).1;
        }
        Ok(a)
    }

    /// Backpropagates `d_out = ∂J/∂F` through the tape.
    pub fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<Gradients> {
        let n = self.layers.len();
        if tape.pre_activations.len() != n || tape.activations.len() != n + 1 {
            return Err(Error::invalid("tape does not match this network's depth"));
        }
        let m = tape.activations[0].cols();
        for (i, l) in self.layers.iter().enumerate() {
            if tape.activations[i].shape() != (l.in_dim(), m)
                || tape.pre_activations[i].shape() != (l.out_dim(), m)
            {
                return Err(Error::invalid(format!(
                    "tape shapes do not match layer {i}"
                )));
            }
        }
        if d_out.shape() != (self.code_length(), m) {
            return Err(Error::invalid(format!(
                "output gradient is {}x{}, expected {}x{m}",
                d_out.rows(),
                d_out.cols(),
                self.code_length()
            )));
        }

        let mut weights = vec![Matrix::zeros(0, 0); n];
        let mut biases = vec![Vec::new(); n];
        let mut upstream = d_out.clone();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let act = layer.activation;
            let dz = upstream.zip_map(&tape.activations[i + 1], |g, a| {
                g * act.derivative_from_output(a)
            });
            weights[i] = dz.matmul_t(&tape.activations[i]);
            biases[i] = dz.row_sums();
            if i > 0 {
                upstream = layer.weights.t_matmul(&dz);
            }
        }
        Ok(Gradients { weights, biases })
    }

    /// One momentum SGD step:
    /// `v ← μ·v − lr·(g + λ·w)`, `w ← w + v`. Biases skip the decay term.
    pub fn sgd_step(
        &mut self,
        grads: &Gradients,
        cfg: &SgdConfig,
        velocity: &mut Gradients,
    ) -> Result<()> {
        if !grads.matches(self) || !velocity.matches(self) {
            return Err(Error::invalid(
                "gradient or velocity shapes do not match the network",
            ));
        }
        let (lr, mu, decay) = (cfg.learning_rate, cfg.momentum, cfg.weight_decay);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let w = layer.weights.as_mut_slice();
            let g = grads.weights[i].as_slice();
            let v = velocity.weights[i].as_mut_slice();
            for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = mu * *v - lr * (g + decay * *w);
                *w += *v;
            }
            let b = &mut layer.bias;
            let g = &grads.biases[i];
            let v = &mut velocity.biases[i];
            for ((b, &g), v) in b.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = mu * *v - lr * g;
                *b += *v;
            }
        }
        Ok(())
    }
}
