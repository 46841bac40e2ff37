//! Riemannian analysis of multichannel sEMG covariance matrices in Cholesky
//! space: Log-Cholesky geometry, the trial-to-point pipeline, MDM / kernel SVM /
//! k-medoids classifiers, parallel-transport alignment across subjects and
//! t-SNE on geodesic distances.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod alignment;
pub mod classify;
pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod format;
pub mod linalg;
pub mod manifold;
pub mod signal;
pub mod synth;

pub use dataset::LabeledManifoldSet;
pub use error::{Error, Result};
pub use manifold::{
    cholesky, differential_s, differential_s_inv, distance_matrix, embed, exp_map, frechet_mean,
    geodesic_distance, log_map, metric_inner, parallel_transport, reconstruct, spd_metric,
    CholeskyPoint, EmbeddedVector, SpdMatrix, TangentVector,
};
