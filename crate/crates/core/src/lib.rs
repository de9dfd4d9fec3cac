//! Joint estimation of Gaussian graphical models under K related conditions.
//!
//! The pipeline screens each condition's correlation network, computes
//! edge-wise ψ-scores (Fisher-transformed partial correlations given a small
//! separator), integrates each edge's K scores through a Bayesian mixture over
//! status configurations, and detects edges with one multiple test across all
//! conditions.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod bayes;
pub mod data_ingest;
pub mod edge_detection;
pub mod edges;
pub mod error;
pub mod evaluation;
pub mod formats;
pub mod linalg;
pub mod pipeline;
pub mod psi_scores;
pub mod scalar;
pub mod screening;
pub mod simgen;
pub mod special;

pub use error::{FbiaError, Result, Stage};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type ConditionedDataset = data_ingest::ConditionedDataset<f64>;
pub type ConditionBlock = data_ingest::ConditionBlock<f64>;
pub type CorrelationSummary = screening::CorrelationSummary<f64>;
pub type PsiScoreMatrix = psi_scores::PsiScoreMatrix<f64>;
pub type EdgePosterior = bayes::EdgePosterior<f64>;
pub type IntegratedScores = bayes::IntegratedScores<f64>;
pub type GraphEstimate = edge_detection::GraphEstimate<f64>;
pub type FitResult = pipeline::FitResult<f64>;
