//! The `hashnet` command line end to end: train, encode, search, evaluate
//! and the ITQ baseline, driven in-process.
//!
//! ```bash
//! cargo run --release --example cli_pipeline
//! ```

use std::path::Path;

use hashnet::io::{write_features, write_labels};
use hashnet::synthetic::Mixture;
use hashnet::Result;

fn hashnet(args: &[&str]) {
    println!("$ hashnet {}", args.join(" "));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = hashnet::cli::run(
        std::iter::once("hashnet").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    print!("{}", String::from_utf8_lossy(&out));
    eprint!("{}", String::from_utf8_lossy(&err));
    println!("(exit {code})");
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn main() -> Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let at = |name: &str| dir.path().join(name);
    let mixture = Mixture::well_separated(5, 32, 1.0, 6.0, 2024)?;
    let train_set = mixture.sample(2000, 1);
    let query_set = mixture.sample(500, 2);
    write_features(at("train.hsf"), &train_set.features)?;
    write_labels(at("train.hsl"), &train_set.labels)?;
    write_features(at("query.hsf"), &query_set.features)?;
    write_labels(at("query.hsl"), &query_set.labels)?;

    let (train_x, train_y, query_x, query_y) = (
        at("train.hsf"),
        at("train.hsl"),
        at("query.hsf"),
        at("query.hsl"),
    );
    let (model, db, q) = (at("model.json"), at("db.hsb"), at("q.hsb"));

    hashnet(&[
        "train",
        "--features",
        path(&train_x),
        "--labels",
        path(&train_y),
        "--out",
        path(&model),
        "--bits",
        "16",
        "--beta",
        "0.1",
        "--lr",
        "3",
    ]);
    let log = std::fs::read_to_string(at("model.json.log")).expect("training log");
    println!("last log line: {}", log.lines().last().unwrap_or(""));

    hashnet(&[
        "encode",
        "--model",
        path(&model),
        "--features",
        path(&train_x),
        "--out",
        path(&db),
    ]);
    hashnet(&[
        "encode",
        "--model",
        path(&model),
        "--features",
        path(&query_x),
        "--out",
        path(&q),
    ]);

    let hits = at("hits.txt");
    hashnet(&[
        "search",
        "--db",
        path(&db),
        "--queries",
        path(&q),
        "--k",
        "5",
        "--out",
        path(&hits),
    ]);
    let text = std::fs::read_to_string(&hits).expect("search output");
    for line in text.lines().take(3) {
        println!("  {line}");
    }

    hashnet(&[
        "eval",
        "--db-codes",
        path(&db),
        "--db-labels",
        path(&train_y),
        "--query-codes",
        path(&q),
        "--query-labels",
        path(&query_y),
    ]);

    let itq_db = at("itq_db.hsb");
    hashnet(&[
        "itq",
        "--features",
        path(&train_x),
        "--bits",
        "16",
        "--iters",
        "5",
        "--out",
        path(&itq_db),
    ]);
    for codes in [&db, &itq_db] {
        hashnet(&[
            "eval",
            "--db-codes",
            path(codes),
            "--db-labels",
            path(&train_y),
            "--query-codes",
            path(codes),
            "--query-labels",
            path(&train_y),
            "--leave-one-out",
        ]);
    }
    Ok(())
}
