use std::path::{Path, PathBuf};

use compulse::metrics::{Interval, ScanSpec};
use compulse::optimizer::{ParameterFamily, TrainConfig};
use compulse::tasks::TaskSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Meta-strategy wrapped around the gradient loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// One training from one random initialization.
    #[default]
    Plain,
    /// `runs` independent trainings; the best tested run is kept.
    Restart { runs: usize },
    /// Escape-based training over `optimizer.groups` groups.
    Escape,
}

/// Optional two-dimensional pulse-area × detuning scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan2d {
    pub area: Interval,
    pub detuning: Interval,
    #[serde(default = "default_grid_2d")]
    pub grid_size: usize,
}

fn default_grid_2d() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSpec,
    /// Training samples per group (K).
    pub samples: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_family")]
    pub family: ParameterFamily,
    #[serde(default)]
    pub optimizer: TrainConfig,
    /// Testing-stage scan; replaces `optimizer.test`.
    #[serde(default = "default_test")]
    pub test: ScanSpec,
    #[serde(default)]
    pub scan_2d: Option<Scan2d>,
    /// Fresh samples from the training distribution used for an extra
    /// sample-average fidelity in the summary.
    #[serde(default)]
    pub fresh_test_samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_family() -> ParameterFamily {
    ParameterFamily::Phases
}

fn default_test() -> ScanSpec {
    ScanSpec::new(Interval::symmetric(0.1))
}

/// Fields that do not change numeric output.
const NON_NUMERIC: [&str; 2] = ["out", "jobs"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides and checks every field.
    pub fn resolve(mut self, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if jobs.is_some() {
            self.jobs = jobs;
        }
        if out.is_some() {
            self.out = out;
        }
        self.optimizer.seed = self.seed;
        self.optimizer.test = self.test;
        let invalid = CliError::Validation;
        self.task.validate().map_err(|e| invalid(format!("task: {e}")))?;
        self.optimizer.validate().map_err(|e| invalid(format!("optimizer: {e}")))?;
        if self.samples == 0 {
            return Err(invalid("samples: must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs: must be at least 1".into()));
        }
        match self.strategy {
            Strategy::Restart { runs: 0 } => return Err(invalid("strategy.runs: must be at least 1".into())),
            Strategy::Escape if self.optimizer.groups < 2 => {
                return Err(invalid("optimizer.groups: escape needs at least 2 groups".into()))
            }
            Strategy::Escape if self.family != ParameterFamily::Phases => {
                return Err(invalid("family: escape trains phases only".into()))
            }
            _ => {}
        }
        if let Some(s) = &self.scan_2d {
            if s.grid_size < 2 {
                return Err(invalid("scan_2d.grid_size: must be at least 2".into()));
            }
        }
        if self.fresh_test_samples == Some(0) {
            return Err(invalid("fresh_test_samples: must be at least 1".into()));
        }
        Ok(self)
    }

    /// Canonical JSON of the numeric part of the config.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            for k in NON_NUMERIC {
                map.remove(k);
            }
        }
        v
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hash_json(&self.canonical())
    }
}

pub fn hash_json(v: &serde_json::Value) -> String {
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
