//! The alternating optimization written out by hand: SGD on the network with
//! the binary codes fixed, then re-binarize the codes from the outputs.
//!
//! ```bash
//! cargo run --release --example manual_loop
//! ```

use hashnet::hashloss::{loss_grad, loss_terms, similarity_matrix, Hyperparams};
use hashnet::network::{head_spec_for, Gradients, Network, SgdConfig};
use hashnet::pretrain::{pca_fit, ItqEncoder};
use hashnet::synthetic::Mixture;
use hashnet::trainer::{network_outputs, quantization_gap, update_codes, BatchSampler};
use hashnet::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let data = Mixture::well_separated(3, 16, 1.0, 6.0, 5)?.sample(600, 6);
    let bits = 8;
    let batch = 100;
    let hyper = Hyperparams {
        beta: 0.1,
        ..Hyperparams::default()
    };
    let sgd = SgdConfig {
        learning_rate: 3.0,
        ..SgdConfig::default()
    };

    let pca = pca_fit(&data.features, 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Network::hashing(pca.dr_layer(), head_spec_for(bits)?, &mut rng)?;
    let mut codes = ItqEncoder::fit(&data.features, bits, 50, 2)?.encode(&data.features)?;
    let mut velocity = Gradients::zeros_like(&net);
    let mut sampler = BatchSampler::new(data.len(), batch, 3);

    for outer in 1..=4 {
        let mut total = 0.0;
        let steps = 4 * data.len() / batch;
        for _ in 0..steps {
            let ids = sampler.next_batch();
            let labels: Vec<u32> = ids.iter().map(|&i| data.labels[i]).collect();
            let s = similarity_matrix(&labels, &labels)?;
            let b = codes.select_columns(&ids);
            let tape = net.forward(&data.features.select_rows(&ids).transpose())?;
            total += loss_terms(tape.output(), &b, &s, &hyper)?.total();
            let grads = net.backward(&tape, &loss_grad(tape.output(), &b, &s, &hyper)?)?;
            net.sgd_step(&grads, &sgd, &mut velocity)?;
        }
        let previous = codes.clone();
        codes = update_codes(&net, &data.features, 256)?;
        let flipped = previous
            .as_slice()
            .iter()
            .zip(codes.as_slice())
            .filter(|(a, b)| a != b)
            .count();
        let f = network_outputs(&net, &data.features, 256)?;
        println!(
            "outer {outer}: mean loss {:.4e}  bits flipped {flipped:5}  gap {:.4}",
            total / steps as f64,
            quantization_gap(&f, &codes)
        );
    }
    Ok(())
}
