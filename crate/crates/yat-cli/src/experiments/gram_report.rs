//! Gram report: load a stored expansion, emit its Gram matrix as CSV and
//! the closed-form squared norm.

use yat_core::gram::{build_gram, psd_check, rkhs_norm_sq, Expansion};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::record::ResultRecord;

pub fn run(cfg: &ExperimentConfig) -> Result<(ResultRecord, Option<String>), CliError> {
    let path = cfg
        .get_string("input")?
        .ok_or_else(|| CliError::Config("gram_report requires the 'input' parameter".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read expansion file '{path}': {e}")))?;
    let raw: Expansion = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid expansion JSON in '{path}': {e}")))?;
    // Re-validate through the constructor; serde bypasses the invariants.
    let expansion =
        Expansion::with_biases(raw.centers, raw.coefficients, raw.params, raw.per_atom_bias)?;

    let gram = build_gram(&expansion.centers, &expansion.params)?;
    let psd = psd_check(&gram, 1e-8);

    let mut record = ResultRecord::new(cfg);
    record.metric("n_atoms", expansion.len() as f64);
    record.metric("gram_min_eig", psd.min_eigenvalue);
    record.metric("gram_max_eig", psd.max_eigenvalue);
    if expansion.per_atom_bias.is_none() {
        record.metric("rkhs_norm_sq", rkhs_norm_sq(&expansion)?);
    }
    Ok((record, Some(gram.to_csv())))
}
