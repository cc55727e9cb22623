//! Benchmark characterization from hardware counters: metric derivation,
//! PCA, hierarchical clustering, representative subsets, suite comparison
//! and rolling round-robin proxy mixes.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod cluster;
pub mod compare;
pub mod dataset;
pub mod features;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod proxy;
pub mod reduce;
pub mod scalar;
pub mod stats;
pub mod subset;

pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type PcaModel64 = reduce::PcaModel<f64>;
pub type PcaModel32 = reduce::PcaModel<f32>;
pub type Dendrogram64 = cluster::Dendrogram<f64>;
pub type Dendrogram32 = cluster::Dendrogram<f32>;
pub type ScoreTable64 = subset::ScoreTable<f64>;
pub type ScoreTable32 = subset::ScoreTable<f32>;
pub type SubsetReport64 = subset::SubsetReport<f64>;
