//! Fit PCA on correlated data and turn it into the network's
//! dimension-reduction layer.
//!
//! ```bash
//! cargo run --example pca_dr_layer
//! ```

use hashnet::network::Network;
use hashnet::numerics::sym_eig;
use hashnet::pretrain::pca_fit;
use hashnet::synthetic::Mixture;
use hashnet::{Matrix, Result};

fn main() -> Result<()> {
    let data = Mixture::well_separated(4, 12, 1.0, 6.0, 7)?.sample(400, 8);
    let x = &data.features;

    let pca = pca_fit(x, 4)?;
    let total: f64 = {
        let n = x.rows() as f64;
        let mean: Vec<f64> = (0..x.cols())
            .map(|c| x.column(c).iter().sum::<f64>() / n)
            .collect();
        let centered = Matrix::from_fn(x.rows(), x.cols(), |r, c| x[(r, c)] - mean[c]);
        let cov = centered.t_matmul(&centered).scale(1.0 / (n - 1.0));
        sym_eig(&cov, 1e-12)?.values.iter().sum()
    };
    println!("top-4 eigenvalues {:.3?}", pca.eigenvalues);
    println!(
        "explained variance {:.1}%",
        100.0 * pca.eigenvalues.iter().sum::<f64>() / total
    );

    let layer = pca.dr_layer();
    println!(
        "DR layer: {} -> {}, activation {}",
        layer.in_dim(),
        layer.out_dim(),
        layer.activation.name()
    );

    // The layer reproduces the centered projection on every sample.
    let dr = Network::from_layers_unchecked(vec![layer])?;
    let through_layer = dr.predict(&x.transpose())?.transpose();
    let projected = pca.transform(x)?;
    println!(
        "max |layer - transform| = {:e}",
        through_layer.max_abs_diff(&projected)
    );
    Ok(())
}
