//! Command-line pipeline around the `lifefolio` library: returns CSV in, fund weights,
//! frontier tables and plot, insurance valuation and a lifecycle plan out.

pub mod config;
pub mod pipeline;
pub mod svg;

pub use config::{Flags, RunConfig};
pub use pipeline::{run_pipeline, RunReport, Stage};
