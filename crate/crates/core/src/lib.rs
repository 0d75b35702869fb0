//! Supervised learning-to-hash.
//!
//! A small fully connected hashing network sits on top of precomputed
//! features: a dimension-reduction layer initialized by PCA, followed by a
//! three-layer sigmoid head whose output is pushed toward binary codes. The
//! network is trained by alternating between minibatch SGD on a relaxed
//! objective (pairwise similarity, quantization, bit independence, bit
//! balance) and re-binarizing an auxiliary code matrix. Initial codes come
//! from iterative quantization (ITQ).
//!
//! Retrieval is an exact linear Hamming scan over bit-packed codes, scored
//! with mean average precision.
//!
//! Module map:
//!
//! - [`numerics`]: dense matrices, Jacobi eigensolver, orthogonal Procrustes
//! - [`hashloss`]: similarity matrix, relaxed loss and its gradient
//! - [`network`]: layers, forward/backward, SGD with momentum
//! - [`pretrain`]: PCA dimension reduction, ITQ
//! - [`trainer`]: the alternating training loop
//! - [`index`]: binarization, packing, Hamming search, mAP
//! - [`io`]: the binary feature/label/code files and the JSON model file
//! - [`cli`]: the `hashnet` command line
//! - [`synthetic`]: seeded Gaussian-mixture datasets for tests and examples
//!
//! Runnable examples (`cargo run --release --example <name>`):
//!
//! | example          | shows                                                    |
//! |------------------|----------------------------------------------------------|
//! | `pca_dr_layer`   | PCA fit and the dimension-reduction layer it produces    |
//! | `itq_baseline`   | ITQ objective trace and baseline retrieval quality       |
//! | `gradient_check` | loss and backprop gradients against finite differences   |
//! | `train_synthetic`| full training run, compared with ITQ                     |
//! | `manual_loop`    | the alternating optimization written out step by step    |
//! | `hamming_search` | bit packing and exact k-nearest-neighbour search         |
//! | `map_eval`       | average precision and leave-one-out mAP                  |
//! | `file_formats`   | feature, label, code and model files                     |
//! | `cli_pipeline`   | train, encode, search, eval and itq through the CLI      |

pub mod cli;
pub mod error;
pub mod hashloss;
pub mod index;
pub mod io;
pub mod network;
pub mod numerics;
pub mod pretrain;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use numerics::Matrix;
