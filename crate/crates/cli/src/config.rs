//! Run configuration: TOML file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use handover_core::episode::EnvConfig;
use handover_core::policies::{PolicyKind, PolicyParams};
use handover_core::scene::{GeneratorConfig, Setup, Split};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog generation seed.
    pub seed: u64,
    pub setup: Setup,
    pub split: Split,
    /// Seed of the S0 random partition.
    pub split_seed: u64,
    pub policy: PolicyKind,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    /// Catalog directory.
    pub data_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_dir: Option<PathBuf>,
    /// Chain description file; the built-in arm when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub env: EnvConfig,
    pub policies: PolicyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            setup: Setup::S0,
            split: Split::Test,
            split_seed: 0,
            policy: PolicyKind::HoldThenPlan,
            parallelism: 0,
            data_dir: PathBuf::from("data"),
            results: None,
            trace_dir: None,
            chain: None,
            generator: GeneratorConfig::default(),
            env: EnvConfig::default(),
            policies: PolicyParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.generator.validate()?;
        self.env.validate()?;
        self.policies.validate()?;
        Ok(())
    }

    pub fn threads(&self) -> usize {
        if self.parallelism > 0 {
            self.parallelism
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// Results file, defaulting to one per policy, setup and split under
    /// the data directory.
    pub fn results_path(&self) -> PathBuf {
        self.results.clone().unwrap_or_else(|| {
            self.data_dir
                .join("results")
                .join(format!("{}_{}_{}.txt", self.policy.name(), self.setup, self.split))
        })
    }
}
