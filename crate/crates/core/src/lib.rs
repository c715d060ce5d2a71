//! Binding diagnostics for multi-subject image generation.

pub mod aggregation;
pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod mask;
pub mod matching;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod thresholds;

pub use error::{Error, Result};
