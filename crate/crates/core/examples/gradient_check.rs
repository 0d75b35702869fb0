//! Compare the analytic gradients of the relaxed hashing loss and of
//! network backpropagation against central finite differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use hashnet::hashloss::{loss, loss_grad, loss_terms, similarity_matrix, Hyperparams};
use hashnet::network::{head_spec_for, Activation, Layer, Network};
use hashnet::{Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = Hyperparams {
        alpha: 0.5,
        beta: 0.3,
        theta: 0.2,
        gamma: 0.4,
    };
    let labels = [0, 1, 1, 2, 0, 2];
    let s = similarity_matrix(&labels, &labels)?;

    let f = Matrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
    let b = Matrix::from_fn(4, 6, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    println!("loss terms {:?}", loss_terms(&f, &b, &s, &h)?);

    let analytic = loss_grad(&f, &b, &s, &h)?;
    let mut worst: f64 = 0.0;
    for r in 0..f.rows() {
        for c in 0..f.cols() {
            let mut probe = f.clone();
            probe.as_mut_slice()[r * f.cols() + c] += STEP;
            let up = loss(&probe, &b, &s, &h)?;
            probe.as_mut_slice()[r * f.cols() + c] -= 2.0 * STEP;
            let down = loss(&probe, &b, &s, &h)?;
            worst = worst.max((analytic[(r, c)] - (up - down) / (2.0 * STEP)).abs());
        }
    }
    println!("loss_grad   max error {worst:.2e}");

    let dr = Layer::random(10, 6, Activation::Identity, &mut rng);
    let net = Network::hashing(dr, head_spec_for(4)?, &mut rng)?;
    let x = Matrix::from_fn(10, 6, |_, _| rng.random_range(-1.0..1.0));
    let tape = net.forward(&x)?;
    let grads = net.backward(&tape, &loss_grad(tape.output(), &b, &s, &h)?)?;

    let objective = |layers: Vec<Layer>| -> Result<f64> {
        let f = Network::new(layers)?.predict(&x)?;
        loss(&f, &b, &s, &h)
    };
    let mut worst: f64 = 0.0;
    for (li, layer) in net.layers().iter().enumerate() {
        for i in 0..layer.weights.as_slice().len() {
            let mut up = net.layers().to_vec();
            up[li].weights.as_mut_slice()[i] += STEP;
            let mut down = net.layers().to_vec();
            down[li].weights.as_mut_slice()[i] -= STEP;
            let numeric = (objective(up)? - objective(down)?) / (2.0 * STEP);
            worst = worst.max((grads.weights[li].as_slice()[i] - numeric).abs());
        }
    }
    println!("backward    max weight error {worst:.2e}");
    Ok(())
}
