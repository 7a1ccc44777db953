//! Experiment configuration: one JSON document, validated with error paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, FunctionSpec};
use crate::stats::Probability;
use crate::whitenoise::DEFAULT_J_MAX;
use crate::Model;

fn default_alpha() -> Probability {
    Probability::open(0.05).expect("0.05 is a valid level")
}

/// Where an experiment writes its results. Unset paths are skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
}

impl OutputPaths {
    /// `records.csv`, `summary.csv` and `summary.json` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            records_csv: Some(dir.join("records.csv")),
            summary_csv: Some(dir.join("summary.csv")),
            summary_json: Some(dir.join("summary.json")),
        }
    }
}

/// Raw experiment configuration as it appears on disk.
///
/// ```json
/// {
///   "model": "regression",
///   "function": { "family": "cusp", "params": { "center": 0.5, "exponent": 2 } },
///   "n": 511, "sigma": 0.5,
///   "alpha": 0.05, "replications": 2000, "base_seed": 1
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub function: FunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Probability,
    pub replications: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<u32>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Noise specification after validation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Setting {
    Whitenoise { eps: f64, j_max: u32 },
    Regression { n: usize, sigma: f64 },
}

impl Setting {
    pub fn model(&self) -> Model {
        match self {
            Setting::Whitenoise { .. } => Model::Whitenoise,
            Setting::Regression { .. } => Model::Regression,
        }
    }

    /// `eps` for white noise, `sigma / sqrt(n)` for regression.
    pub fn effective_noise(&self) -> f64 {
        match *self {
            Setting::Whitenoise { eps, .. } => eps,
            Setting::Regression { n, sigma } => sigma / (n as f64).sqrt(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        config.setting()?;
        Ok(config)
    }

    /// Reads and validates a config file; a missing or unreadable file is a
    /// config error.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        ExperimentConfig::from_json_str(&text)
    }

    /// Checks cross-field rules and returns the noise specification.
    pub fn setting(&self) -> Result<Setting> {
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        ConvexFunction::new(self.function.clone())
            .map_err(|e| Error::config("function", e.to_string()))?;
        match self.model {
            Model::Whitenoise => {
                for (name, present) in [("n", self.n.is_some()), ("sigma", self.sigma.is_some())] {
                    if present {
                        return Err(Error::config(name, "only applies to the regression model"));
                    }
                }
                let eps = self
                    .eps
                    .ok_or_else(|| Error::config("eps", "required for the whitenoise model"))?;
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::config("eps", format!("must be positive, got {eps}")));
                }
                let j_max = self.j_max.unwrap_or(DEFAULT_J_MAX);
                if j_max == 0 || j_max > 60 {
                    return Err(Error::config("j_max", format!("must lie in 1..=60, got {j_max}")));
                }
                Ok(Setting::Whitenoise { eps, j_max })
            }
            Model::Regression => {
                if self.eps.is_some() {
                    return Err(Error::config("eps", "only applies to the whitenoise model"));
                }
                if self.j_max.is_some() {
                    return Err(Error::config("j_max", "only applies to the whitenoise model"));
                }
                let n = self
                    .n
                    .ok_or_else(|| Error::config("n", "required for the regression model"))?;
                if n < 2 {
                    return Err(Error::config("n", format!("must be at least 2, got {n}")));
                }
                let sigma = self
                    .sigma
                    .ok_or_else(|| Error::config("sigma", "required for the regression model"))?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::config("sigma", format!("must be positive, got {sigma}")));
                }
                Ok(Setting::Regression { n, sigma })
            }
        }
    }
}
