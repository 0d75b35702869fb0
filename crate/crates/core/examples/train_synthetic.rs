//! Train on a separable 5-class Gaussian mixture and compare retrieval
//! quality against the unsupervised ITQ baseline.
//!
//! Pass `--defaults` to keep the library's default quantization weight and
//! learning rate instead of the stronger desk-scale settings.
//!
//! ```bash
//! cargo run --release --example train_synthetic
//! cargo run --release --example train_synthetic -- --defaults
//! ```

use std::time::Instant;

use hashnet::index::{mean_average_precision, pack, search_all};
use hashnet::pretrain::ItqEncoder;
use hashnet::synthetic::Mixture;
use hashnet::trainer::{network_outputs, quantization_gap, train, TrainConfig};
use hashnet::{Matrix, Result};

fn map_of(db: &Matrix, db_labels: &[u32], q: &Matrix, q_labels: &[u32]) -> Result<f64> {
    let db = pack(db)?;
    let q = pack(q)?;
    let rankings = search_all(&db, &q, db.len(), false)?;
    mean_average_precision(&rankings, q_labels, db_labels)
}

fn main() -> Result<()> {
    let bits = 16;
    let defaults = std::env::args().any(|a| a == "--defaults");
    let mixture = Mixture::well_separated(5, 32, 1.0, 6.0, 2024)?;
    let train_set = mixture.sample(2000, 1);
    let query_set = mixture.sample(500, 2);

    let mut cfg = TrainConfig::new(train_set.len(), bits)?;
    if !defaults {
        cfg.hyper.beta = 0.1;
        cfg.sgd.learning_rate = 3.0;
    }
    let start = Instant::now();
    let state = train(&train_set, &cfg)?;
    println!(
        "trained in {:.2?}: beta={} lr={} K={} T={} m={}",
        start.elapsed(),
        cfg.hyper.beta,
        cfg.sgd.learning_rate,
        cfg.schedule.outer,
        cfg.schedule.inner,
        cfg.schedule.batch
    );
    for k in 1..=cfg.schedule.outer {
        println!(
            "  outer {k}: mean batch loss {:.6e}",
            state.mean_loss(k).unwrap()
        );
    }

    let f_train = network_outputs(&state.network, &train_set.features, 256)?;
    println!(
        "quantization gap {:.4}",
        quantization_gap(&f_train, &state.codes)
    );

    let db = hashnet::index::binarize(&f_train);
    let q = hashnet::index::binarize(&network_outputs(&state.network, &query_set.features, 256)?);
    let trained = map_of(&db, &train_set.labels, &q, &query_set.labels)?;

    let itq = ItqEncoder::fit(&train_set.features, bits, cfg.itq_iters, 0)?;
    let baseline = map_of(
        &itq.encode(&train_set.features)?,
        &train_set.labels,
        &itq.encode(&query_set.features)?,
        &query_set.labels,
    )?;
    println!("mAP trained {trained:.4}  ITQ {baseline:.4}");
    Ok(())
}
