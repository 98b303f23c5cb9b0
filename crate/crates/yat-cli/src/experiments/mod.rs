//! Experiment runners, one per CLI subcommand. Each returns the machine
//! record plus an optional CSV table.

pub mod certify;
pub mod cv;
pub mod gram_report;
pub mod identity;
pub mod mmd;
pub mod ntk;
pub mod psd;
pub mod spectrum;
pub mod tail;

use std::time::Instant;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::record::ResultRecord;

/// Validate and dispatch one experiment, filling in the runtime.
pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let (mut record, csv) = match cfg.experiment {
        ExperimentKind::TailBench => tail::run(cfg),
        ExperimentKind::CvBench => cv::run(cfg),
        ExperimentKind::Spectrum => spectrum::run(cfg),
        ExperimentKind::IdentitySuite => identity::run(cfg),
        ExperimentKind::PsdSuite => psd::run(cfg),
        ExperimentKind::MmdTest => mmd::run(cfg),
        ExperimentKind::Certify => certify::run(cfg),
        ExperimentKind::NtkConvergence => ntk::run(cfg),
        ExperimentKind::GramReport => gram_report::run(cfg),
    }?;
    record.runtime_ms = started.elapsed().as_millis() as u64;
    Ok((record, csv))
}
