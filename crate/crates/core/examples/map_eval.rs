//! Mean average precision over full Hamming rankings, with and without
//! leave-one-out.
//!
//! ```bash
//! cargo run --example map_eval
//! ```

use hashnet::index::{average_precision, mean_average_precision, pack, search_all};
use hashnet::{Matrix, Result};

fn main() -> Result<()> {
    // One relevant item at rank 1 and another at rank 3.
    let ap = average_precision([true, false, true], 2).expect("has relevant items");
    println!("AP of [hit, miss, hit] = {ap:.6}");

    // Three classes, each with its own one-hot code, plus a class-0 item whose
    // code sits one bit away from both class 1 and class 2.
    let mut cols: Vec<[f64; 4]> = Vec::new();
    let mut labels = Vec::new();
    for class in 0..3u32 {
        for _ in 0..4 {
            let mut code = [-1.0; 4];
            code[class as usize] = 1.0;
            cols.push(code);
            labels.push(class);
        }
    }
    cols.push([-1.0, 1.0, 1.0, -1.0]);
    labels.push(0);

    let codes = Matrix::from_fn(4, cols.len(), |r, c| cols[c][r]);
    let db = pack(&codes)?;
    let full = search_all(&db, &db, db.len(), false)?;
    let loo = search_all(&db, &db, db.len(), true)?;
    println!(
        "mAP with self-matches {:.6}, leave-one-out {:.6}",
        mean_average_precision(&full, &labels, &labels)?,
        mean_average_precision(&loo, &labels, &labels)?
    );
    Ok(())
}
