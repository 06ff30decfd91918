//! Explainable weighted k-nearest-neighbour ensembles for ordinal
//! emotion-intensity classification of short texts.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: task TSV files, datasets and submission output
//! - [`preprocess`]: tweet cleaning and tokenization
//! - [`lexicon`]: emotion lexicons and tweet-level lexicon vectors
//! - [`features`]: embedding stores, pooling, min-max scaling, feature composition
//! - [`knn`]: cosine similarity and the weighted kNN predictor
//! - [`ensemble`]: mean-vote ensembles and label rounding
//! - [`eval`]: Pearson correlation, stratified cross-validation and statistics
//! - [`explain`]: neighbour histograms, intersections and reports
//! - [`config`] and [`runner`]: the experiment protocol driven by the CLI

pub mod config;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod knn;
pub mod lexicon;
pub mod preprocess;
pub mod runner;

pub use error::{Error, Result};
