//! Front end for the `lbes` command: configuration, run orchestration,
//! sweeps, self-checks and CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod csvio;
pub mod error;
pub mod plot;
pub mod presets;
pub mod sweep;
pub mod verify;

pub use config::RunSpec;
pub use error::{exit, CliError};
