//! Experiment configuration files (TOML).
//!
//! ```toml
//! id = "gauss-decay"
//! seed = 7
//! out = "results/gauss"
//!
//! [sieve]
//! limit = 100000
//!
//! [params]
//! qmax = 200
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::acceptance::{DEFAULT_SEED, SIEVE_LIMIT};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory for the CSV and JSON artifacts.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub sieve: SieveConfig,
    /// Named bounds replacing the experiment defaults; the key `all` applies
    /// to every check without its own entry.
    #[serde(default)]
    pub tolerance: BTreeMap<String, f64>,
    /// Experiment-specific settings; each experiment validates its own keys.
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SieveConfig {
    pub limit: u64,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self { limit: SIEVE_LIMIT }
    }
}

pub const ALL_CHECKS: &str = "all";

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            seed: DEFAULT_SEED,
            out: default_out(),
            sieve: SieveConfig::default(),
            tolerance: BTreeMap::new(),
            params: toml::Table::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {}", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Decodes `params` into the experiment's own settings; unknown keys are
    /// rejected by name.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| anyhow::anyhow!("[params]: {}", e.message()))
    }

    pub fn tolerance_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.tolerance.get(key).or_else(|| self.tolerance.get(ALL_CHECKS)) {
            Some(&v) if v.is_finite() && v >= 0.0 => Ok(v),
            Some(v) => bail!("tolerance {key:?} must be finite and non-negative, got {v}"),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_roundtrip() {
        let c = ExperimentConfig::parse("id = \"gauss-decay\"\n[params]\nqmax = 30\n").unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.params["qmax"].as_integer(), Some(30));
        assert_eq!(ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_top_level_key_is_named() {
        let e = ExperimentConfig::parse("id = \"x\"\nsed = 3\n").unwrap_err().to_string();
        assert!(e.contains("sed"), "{e}");
    }

    #[test]
    fn unknown_param_is_named() {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        #[allow(dead_code)]
        struct P {
            qmax: u64,
        }
        let c = ExperimentConfig::parse("id = \"x\"\n[params]\nqmx = 3\n").unwrap();
        let e = c.params::<P>().err().unwrap().to_string();
        assert!(e.contains("qmx"), "{e}");
    }
}
