//! Manifold classifiers and their evaluation.

pub mod eval;
pub mod kmedoids;
pub mod mdm;
pub mod model;
pub mod svm;

pub use eval::{cluster_accuracy, evaluate, hungarian, Evaluation};
pub use kmedoids::{kmedoids, kmedoids_labeled, kmedoids_with_config, ClusterResult, KMedoidsConfig};
pub use mdm::{mdm_predict, mdm_train, MdmModel};
pub use model::Model;
pub use svm::{gram_matrix, kernel, svm_predict, svm_train, SvmModel, SvmParams};
