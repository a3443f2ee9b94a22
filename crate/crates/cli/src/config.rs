use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use seqrisk::evaluation::HorizonMode;
use seqrisk::model::ModelConfig;
use seqrisk::pipeline::PrepConfig;
use seqrisk::synth::CohortConfig;
use seqrisk::training::TrainConfig;

use crate::Invalid;

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub horizon_mode: HorizonMode,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            horizon_mode: HorizonMode::Cumulative,
            n_boot: 1000,
            seed: 0,
        }
    }
}

/// Everything a run needs. Every command writes the resolved value to
/// `config.json` in its run directory; passing that file back with
/// `--config` replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cohort: CohortConfig,
    pub prep: PrepConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub split_seed: u64,
    pub model_seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cohort: CohortConfig::default(),
            prep: PrepConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            split_seed: 0,
            model_seed: 0,
            checkpoint_every: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("cohort", self.cohort.validate()),
            ("prep", self.prep.validate()),
            ("model", self.model.validate()),
            ("train", self.train.validate()),
        ];
        for (section, r) in checks {
            r.map_err(|e| Invalid(format!("{section}: {e}")))?;
        }
        if self.eval.n_boot == 0 {
            return Err(Invalid("eval.n_boot: must be positive".into()).into());
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}
