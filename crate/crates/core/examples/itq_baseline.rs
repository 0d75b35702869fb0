//! Unsupervised ITQ codes: watch the quantization objective fall, then
//! measure retrieval quality on held-out queries.
//!
//! ```bash
//! cargo run --release --example itq_baseline
//! ```

use hashnet::index::{mean_average_precision, pack, search_all};
use hashnet::pretrain::ItqEncoder;
use hashnet::synthetic::Mixture;
use hashnet::Result;

fn main() -> Result<()> {
    let mixture = Mixture::well_separated(5, 32, 1.0, 6.0, 2024)?;
    let db = mixture.sample(2000, 1);
    let queries = mixture.sample(500, 2);

    for bits in [8, 16, 32] {
        let enc = ItqEncoder::fit(&db.features, bits, 50, 0)?;
        let trace = &enc.objective_trace;
        let db_codes = pack(&enc.encode(&db.features)?)?;
        let q_codes = pack(&enc.encode(&queries.features)?)?;
        let rankings = search_all(&db_codes, &q_codes, db_codes.len(), false)?;
        let map = mean_average_precision(&rankings, &queries.labels, &db.labels)?;
        println!(
            "L={bits:2}  objective {:.1} -> {:.1} over {} iterations  mAP {map:.4}",
            trace[0],
            trace[trace.len() - 1],
            trace.len()
        );
    }
    Ok(())
}
