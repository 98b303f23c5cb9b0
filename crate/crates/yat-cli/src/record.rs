//! Machine-readable run records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One experiment outcome: echoed parameters, named metrics, the pass flag
/// where the experiment has an acceptance meaning, timing, and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub metrics: BTreeMap<String, f64>,
    pub pass: Option<bool>,
    pub runtime_ms: u64,
    pub seed: u64,
    pub artifact_version: String,
}

impl ResultRecord {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            parameters: cfg.parameters.clone(),
            metrics: BTreeMap::new(),
            pass: None,
            runtime_ms: 0,
            seed: cfg.seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialization cannot fail")
    }

    /// Aligned key/value table for terminal output.
    pub fn human_table(&self) -> String {
        let width = self
            .metrics
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!("experiment: {}  (seed {})\n", self.experiment, self.seed);
        for (k, v) in &self.metrics {
            out.push_str(&format!("  {k:width$}  {v}\n"));
        }
        if let Some(p) = self.pass {
            out.push_str(&format!(
                "  {:width$}  {}\n",
                "pass",
                if p { "true" } else { "false" }
            ));
        }
        out.push_str(&format!("  {:width$}  {} ms\n", "runtime", self.runtime_ms));
        out
    }
}

/// Write `record.json` (and `table.csv` when present) under `dir`.
pub fn write_outputs(
    dir: &Path,
    record: &ResultRecord,
    table_csv: Option<&str>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("record.json"), record.to_json())?;
    if let Some(csv) = table_csv {
        std::fs::write(dir.join("table.csv"), csv)?;
    }
    Ok(())
}
