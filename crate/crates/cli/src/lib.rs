//! Command-line front end for `hydrocheck`: definition files, check
//! selection, and text or structured reports.

pub mod definition;
pub mod error;
pub mod output;
pub mod runner;

pub use error::{CliError, Result};
