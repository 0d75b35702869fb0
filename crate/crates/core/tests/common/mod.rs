//! Test-only oracles, kept independent of the library's implementation paths.

#![allow(dead_code)]

use hashnet::hashloss::{loss, loss_grad, Hyperparams};
use hashnet::network::{Activation, Layer, Network};
use hashnet::Matrix;
use rand::Rng;

/// The four-term objective written as plain scalar loops.
pub fn scalar_loss(f: &Matrix, b: &Matrix, s: &Matrix, h: &Hyperparams) -> f64 {
    let (l, m) = f.shape();
    let (lf, mf) = (l as f64, m as f64);
    let mut sim = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut g = 0.0;
            for r in 0..l {
                g += f[(r, i)] * f[(r, j)];
            }
            let d = g / lf - s[(i, j)];
            sim += d * d;
        }
    }
    let mut quant = 0.0;
    for r in 0..l {
        for i in 0..m {
            let d = f[(r, i)] - b[(r, i)];
            quant += d * d;
        }
    }
    let mut indep = 0.0;
    for p in 0..l {
        for q in 0..l {
            let mut g = 0.0;
            for i in 0..m {
                g += f[(p, i)] * f[(q, i)];
            }
            let d = g / mf - if p == q { 1.0 } else { 0.0 };
            indep += d * d;
        }
    }
    let mut bal = 0.0;
    for r in 0..l {
        let mut sum = 0.0;
        for i in 0..m {
            sum += f[(r, i)];
        }
        bal += (sum / mf) * (sum / mf);
    }
    h.alpha / (2.0 * mf * mf) * sim
        + h.beta / (2.0 * mf) * quant
        + h.theta / 2.0 * indep
        + h.gamma / 2.0 * bal
}

/// Central finite differences of `f` at every entry of `x`.
pub fn numeric_gradient(x: &Matrix, step: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let orig = probe[(r, c)];
            probe[(r, c)] = orig + step;
            let up = f(&probe);
            probe[(r, c)] = orig - step;
            let down = f(&probe);
            probe[(r, c)] = orig;
            grad[(r, c)] = (up - down) / (2.0 * step);
        }
    }
    grad
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn random_signs<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(
        rows,
        cols,
        |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 },
    )
}

pub fn random_labels<R: Rng>(n: usize, classes: u32, rng: &mut R) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

pub fn random_hyperparams<R: Rng>(rng: &mut R) -> Hyperparams {
    Hyperparams {
        alpha: rng.random_range(0.0..1.0),
        beta: rng.random_range(0.0..1.0),
        theta: rng.random_range(0.0..1.0),
        gamma: rng.random_range(0.0..1.0),
    }
}

/// Average precision computed from a relevance list by a different route:
/// precision at each hit rank via a prefix count over the whole list.
pub fn oracle_ap(relevant: &[bool]) -> Option<f64> {
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut acc = 0.0;
    for (k, _) in relevant.iter().enumerate().filter(|(_, &r)| r) {
        let hits_up_to_k = relevant[..=k].iter().filter(|&&r| r).count();
        acc += hits_up_to_k as f64 / (k + 1) as f64;
    }
    Some(acc / total as f64)
}

/// Hamming distance bit by bit from unpacked ±1 columns.
pub fn naive_hamming(a: &Matrix, i: usize, b: &Matrix, j: usize) -> u32 {
    (0..a.rows()).filter(|&r| a[(r, i)] != b[(r, j)]).count() as u32
}

/// A hashing-shaped network with random depth 1..=3, random widths up to 10,
/// random hidden activations and random biases.
pub fn random_network<R: Rng>(rng: &mut R) -> Network {
    let depth = rng.random_range(1..=3);
    let mut dims = vec![rng.random_range(1..=10)];
    for _ in 0..depth {
        dims.push(rng.random_range(1..=10));
    }
    let acts = [
        Activation::Identity,
        Activation::Sigmoid,
        Activation::ScaledSigmoid,
    ];
    let layers = (0..depth)
        .map(|i| {
            let act = if i + 1 == depth {
                Activation::ScaledSigmoid
            } else {
                acts[rng.random_range(0..3)]
            };
            let mut layer = Layer::random(dims[i], dims[i + 1], act, rng);
            layer.bias = (0..dims[i + 1])
                .map(|_| rng.random_range(-0.5..0.5))
                .collect();
            layer
        })
        .collect();
    Network::new(layers).unwrap()
}

fn with_param(net: &Network, li: usize, weight: bool, idx: (usize, usize), delta: f64) -> Network {
    let mut layers = net.layers().to_vec();
    if weight {
        layers[li].weights[idx] += delta;
    } else {
        layers[li].bias[idx.0] += delta;
    }
    Network::new(layers).unwrap()
}

/// Largest gap between backprop and central differences over every weight
/// and bias, for the loss of `net` on `x`.
pub fn network_gradient_error(
    net: &Network,
    x: &Matrix,
    b: &Matrix,
    s: &Matrix,
    h: &Hyperparams,
    step: f64,
) -> f64 {
    let objective = |n: &Network| loss(&n.predict(x).unwrap(), b, s, h).unwrap();
    let central = |li, weight, idx| {
        let up = objective(&with_param(net, li, weight, idx, step));
        let down = objective(&with_param(net, li, weight, idx, -step));
        (up - down) / (2.0 * step)
    };
    let tape = net.forward(x).unwrap();
    let d_out = loss_grad(tape.output(), b, s, h).unwrap();
    let grads = net.backward(&tape, &d_out).unwrap();
    let mut worst: f64 = 0.0;
    for (li, layer) in net.layers().iter().enumerate() {
        for r in 0..layer.out_dim() {
            for c in 0..layer.in_dim() {
                worst = worst.max((grads.weights[li][(r, c)] - central(li, true, (r, c))).abs());
            }
            worst = worst.max((grads.biases[li][r] - central(li, false, (r, 0))).abs());
        }
    }
    worst
}
