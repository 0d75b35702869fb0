//! Write and read the binary feature, label and code files and the JSON
//! model document.
//!
//! ```bash
//! cargo run --example file_formats
//! ```

use hashnet::index::pack;
use hashnet::io::{
    load_model, read_codes, read_features, read_labels, save_model, write_codes, write_features,
    write_labels,
};
use hashnet::synthetic::Mixture;
use hashnet::trainer::{train, TrainConfig};
use hashnet::Result;

fn main() -> Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let data = Mixture::well_separated(3, 12, 1.0, 6.0, 1)?.sample(64, 2);

    let features = dir.path().join("train.hsf");
    let labels = dir.path().join("train.hsl");
    write_features(&features, &data.features)?;
    write_labels(&labels, &data.labels)?;
    let bytes = std::fs::read(&features).expect("just written");
    println!(
        "features: {} bytes, header {:02x?}",
        bytes.len(),
        &bytes[..12]
    );
    println!(
        "labels round trip: {}",
        read_labels(&labels)? == data.labels
    );
    println!(
        "features round trip through f32: max error {:.1e}",
        read_features(&features)?.max_abs_diff(&data.features)
    );

    let mut cfg = TrainConfig::new(data.len(), 8)?;
    cfg.schedule.outer = 1;
    let state = train(&data, &cfg)?;
    let model = dir.path().join("model.json");
    save_model(&model, &state.network, Some(cfg))?;
    let (network, doc) = load_model(&model)?;
    println!(
        "model: {} layers, {} bits, identical after reload: {}",
        doc.layers.len(),
        doc.bits,
        network == state.network
    );

    let codes = dir.path().join("train.hsb");
    write_codes(&codes, &pack(&state.codes)?)?;
    let back = read_codes(&codes)?;
    println!(
        "codes: {} x {} bits, {} payload bytes",
        back.len(),
        back.bits(),
        back.payload().len()
    );

    std::fs::write(&codes, b"HSB1\x01\x00\x00\x00").expect("writable");
    if let Err(e) = read_codes(&codes) {
        println!("truncated file: {e}");
    }
    Ok(())
}
