//! Experiment configuration: a JSON document selecting one experiment with
//! a validated key-value parameter map.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TailBench,
    CvBench,
    Spectrum,
    IdentitySuite,
    PsdSuite,
    MmdTest,
    Certify,
    NtkConvergence,
    GramReport,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TailBench => "tail_bench",
            Self::CvBench => "cv_bench",
            Self::Spectrum => "spectrum",
            Self::IdentitySuite => "identity_suite",
            Self::PsdSuite => "psd_suite",
            Self::MmdTest => "mmd_test",
            Self::Certify => "certify",
            Self::NtkConvergence => "ntk_convergence",
            Self::GramReport => "gram_report",
        }
    }

    pub fn all() -> &'static [ExperimentKind] {
        &[
            Self::TailBench,
            Self::CvBench,
            Self::Spectrum,
            Self::IdentitySuite,
            Self::PsdSuite,
            Self::MmdTest,
            Self::Certify,
            Self::NtkConvergence,
            Self::GramReport,
        ]
    }

    /// Parameter keys this experiment accepts. `*` marks required keys.
    pub fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            Self::TailBench => &["m", "lr", "epochs", "n_train", "eval_step"],
            Self::CvBench => &["dims", "mc_samples", "b", "eps"],
            Self::Spectrum => &["d", "eps", "b", "l_max", "family"],
            Self::IdentitySuite => &["draws"],
            Self::PsdSuite => &["sizes", "dims", "biases", "eps"],
            Self::MmdTest => &[
                "n",
                "trials",
                "permutations",
                "alpha",
                "d",
                "shift",
                "b",
                "eps",
            ],
            Self::Certify => &["heads", "classes", "perturbations", "d", "r", "eps"],
            Self::NtkConvergence => &[
                "widths",
                "seeds_per_width",
                "n_points",
                "d",
                "sigma_w",
                "b",
                "eps",
                "gram_mc_samples",
            ],
            Self::GramReport => &["input*"],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::all()
            .iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::all().iter().map(|k| k.name()).collect();
                CliError::Config(format!(
                    "unknown experiment '{s}'; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One experiment run: the experiment, its parameter map, the seed, and
/// where to write outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            parameters: BTreeMap::new(),
            seed: 0,
            output_path: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(s)
            .map_err(|e| CliError::Config(format!("invalid config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reject unknown keys and missing required keys with the full allowed
    /// list in the message.
    pub fn validate(&self) -> Result<(), CliError> {
        let allowed = self.experiment.allowed_keys();
        let names: Vec<&str> = allowed.iter().map(|k| k.trim_end_matches('*')).collect();
        for key in self.parameters.keys() {
            if !names.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown parameter '{key}' for experiment '{}'; allowed keys: {}",
                    self.experiment,
                    names.join(", ")
                )));
            }
        }
        for key in allowed.iter().filter(|k| k.ends_with('*')) {
            let name = key.trim_end_matches('*');
            if !self.parameters.contains_key(name) {
                return Err(CliError::Config(format!(
                    "missing required parameter '{name}' for experiment '{}'",
                    self.experiment
                )));
            }
        }
        Ok(())
    }

    /// Apply a `key=value` override (values parsed as JSON, falling back to
    /// a plain string).
    pub fn set_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, raw) = spec.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override '{spec}' must have the form key=value"))
        })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.parameters.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.parameters.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                CliError::Config(format!("parameter '{key}' must be a number, got {v}"))
            }),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.parameters.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|u| u as usize).ok_or_else(|| {
                CliError::Config(format!(
                    "parameter '{key}' must be a nonnegative integer, got {v}"
                ))
            }),
        }
    }

    pub fn get_string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.parameters.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(CliError::Config(format!(
                "parameter '{key}' must be a string, got {v}"
            ))),
        }
    }

    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.parameters.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_u64().map(|u| u as usize).ok_or_else(|| {
                        CliError::Config(format!(
                            "parameter '{key}' must be a list of integers, got {v}"
                        ))
                    })
                })
                .collect(),
            Some(v) => Err(CliError::Config(format!(
                "parameter '{key}' must be a list, got {v}"
            ))),
        }
    }

    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.parameters.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        CliError::Config(format!(
                            "parameter '{key}' must be a list of numbers, got {v}"
                        ))
                    })
                })
                .collect(),
            Some(v) => Err(CliError::Config(format!(
                "parameter '{key}' must be a list, got {v}"
            ))),
        }
    }
}
