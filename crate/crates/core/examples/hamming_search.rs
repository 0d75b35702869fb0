//! Pack ±1 codes into bytes and run exact Hamming k-nearest-neighbour search.
//!
//! ```bash
//! cargo run --example hamming_search
//! ```

use hashnet::index::{hamming, pack, search, search_all, unpack};
use hashnet::{Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bits = 24;
    let codes = Matrix::from_fn(
        bits,
        1000,
        |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 },
    );

    let db = pack(&codes)?;
    println!(
        "{} codes of {} bits, {} bytes each",
        db.len(),
        db.bits(),
        db.stride()
    );
    println!("code 0 bytes {:02x?}", db.code(0));
    assert_eq!(unpack(&db), codes);

    let hits = search(&db, db.code(0), 5)?;
    println!("nearest to code 0:");
    for (id, dist) in &hits.entries {
        println!("  id {id:4}  distance {dist}");
    }
    println!("d(0, 1) = {}", hamming(db.code(0), db.code(1))?);

    let all = search_all(&db, &db, 3, true)?;
    let (q, best) = all
        .iter()
        .enumerate()
        .min_by_key(|(_, r)| r.entries[0].1)
        .expect("non-empty");
    println!(
        "closest pair excluding self-matches: {q} and {} at distance {}",
        best.entries[0].0, best.entries[0].1
    );
    Ok(())
}
