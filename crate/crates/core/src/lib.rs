//! Graph clustering with homophily-enhanced structure learning.
//!
//! A linear encoder over a low-pass filtered graph is trained to reconstruct
//! the adjacency while a self-training head sharpens cluster assignments.
//! Between training phases the graph itself is edited: confident same-cluster
//! pairs are linked and dissimilar cross-cluster edges are cut.

pub mod clusterer;
pub mod datasets;
pub mod encoder;
pub mod error;
pub mod filter;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod sparse;
pub mod struct_learn;

pub use clusterer::{Centers, SoftAssignment};
pub use datasets::{load_dataset, save_dataset, Dataset, FeatureMatrix, SbmParams};
pub use error::{Error, Result};
pub use filter::FilterSpec;
pub use graph::{edge_homophily, Edge, EdgeDelta, LabelVector, UndirectedGraph};
pub use metrics::{score_all, ClusterScores};
pub use pipeline::{preset, run, BudgetBase, HoleConfig, Restart, RoundTrace, RunOutput};
pub use sparse::CsrMatrix;
pub use struct_learn::RemovalMode;
