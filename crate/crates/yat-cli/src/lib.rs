//! Experiment harness over `yat-core`: configuration, result records, an
//! in-crate Adam optimizer, and the desk-scale experiment suite exposed
//! both as a library and through the `yat-cli` binary.

// `!(x > 0.0)`-style guards deliberately reject NaN along with the
// nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod config;
pub mod error;
pub mod experiments;
pub mod record;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use record::ResultRecord;
