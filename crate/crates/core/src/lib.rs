//! Socio-technical core-periphery analysis of software projects.
//!
//! The pipeline clusters a module dependency matrix, ranks the clusters by
//! core-ness, maps developer activity from version-control history onto the
//! clusters, and tracks the Average Core-Periphery Distance Metric (CPDM)
//! across time windows to classify how a project's developers drift relative
//! to the core of the code.

pub mod clustering;
pub mod config;
pub mod coreness;
pub mod dsm;
pub mod error;
pub mod extract;
pub mod history;
pub mod pipeline;
pub mod report;
pub mod shift;

pub use error::{Error, Result};
