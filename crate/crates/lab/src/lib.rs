//! File formats, reports, plots and the experiment pipeline around
//! `advcausal-core`.

pub mod config;
pub mod container;
pub mod csvdata;
mod error;
pub mod idx;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use error::{LabError, LabResult};
