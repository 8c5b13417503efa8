//! File formats, PNG export and the end-to-end hybrid reconstruction
//! pipeline built on [`dynct_core`].

pub mod error;
pub mod io;
pub mod pipeline;
pub mod png;

pub use dynct_core;
pub use error::{Error, Result};
pub use pipeline::{run_hybrid_pipeline, run_pipeline, ComparisonReport, PipelineConfig};
