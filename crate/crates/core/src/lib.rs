//! Multi-resolution wavelet analysis of storm-centered infrared imagery for
//! rapid-intensification nowcasting.
//!
//! The pipeline runs ingest → wavelet sparsification → sequence datasets →
//! a small convolutional classifier with class-activation maps, plus a
//! quantile tokenizer over the sparse coefficients.

pub mod dataset;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod time;
pub mod tokenizer;
pub mod wavelet;

pub use error::{Error, Result};
