//! # pdbench
//!
//! From-scratch classifiers and a benchmark runner for the UCI Parkinson's
//! voice-measurement dataset (195 recordings, 22 dysphonia features, binary
//! `status` label).
//!
//! The crate is organised as a pipeline:
//!
//! - [`ingest`] loads and validates the CSV, computes summary statistics and
//!   the Pearson correlation matrix.
//! - [`preprocess`] standardises features, fits PCA, and builds stratified
//!   splits and folds.
//! - [`linear_models`], [`svm`], [`tree_ensembles`] and [`neural`] hold the
//!   classifier families.
//! - [`metrics`] scores predictions and times training calls.
//! - [`bench`] runs the hyperparameter grids and writes CSV/Markdown/SVG
//!   reports; [`model_io`] persists trained models with their preprocessing
//!   chain.

pub mod bench;
pub mod data;
pub mod ingest;
pub mod linalg;
pub mod linear_models;
pub mod metrics;
pub mod model_io;
pub mod neural;
pub mod preprocess;
pub mod rng;
pub mod svm;
pub mod tree_ensembles;

pub use data::{FeatureMatrix, Label};
pub use ingest::{Dataset, VoiceRecord, FEATURE_NAMES};
