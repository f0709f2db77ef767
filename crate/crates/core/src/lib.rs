//! Multi-view subspace clustering on an augmented cross-view data matrix.
//!
//! The pipeline has four stages, each in its own module:
//!
//! 1. [`dataset`]: load or synthesize views (features x samples), align them
//!    with PCA, compute cross-view cosine similarities and assemble the
//!    block matrix `X_a` whose diagonal blocks are the raw views and whose
//!    off-diagonal blocks are similarity-weighted products `X_p S_pq`.
//! 2. [`solver`]: an ADMM iteration that learns a projection `P`, an
//!    augmented latent representation `H_a`, a self-representation `Z_a`
//!    with sparse off-diagonal blocks, and column-sparse error terms.
//! 3. [`spectral`]: sum the `v x v` blocks of `Z_a`, build the affinity
//!    `(|Z| + |Z^T|) / 2`, embed with the unnormalized Laplacian and run
//!    k-means.
//! 4. [`metrics`]: ACC, NMI, ARI and pairwise F1 against ground truth.
//!
//! Dense kernels shared by all stages live in [`numerics`].

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod solver;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use numerics::DenseMatrix;
