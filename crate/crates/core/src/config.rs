//! Run configuration: one JSON document with a section per component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::model::ModelConfig;
use crate::pretrain::PretrainConfig;
use crate::rl::TrainConfig;
use crate::sampler::SamplerConfig;
use crate::world::WorldConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub model: ModelConfig,
    /// Decoding settings, including the routing subsection.
    pub sampler: SamplerConfig,
    pub rl: TrainConfig,
    pub pretrain: PretrainConfig,
    pub eval: EvalConfig,
    /// Seeds model initialization, data, rollouts and evaluation.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            world: WorldConfig::default(),
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            rl: TrainConfig::default(),
            pretrain: PretrainConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parsed config together with the raw file text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::from_json(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sampler.validate(self.world.n_tokens())?;
        self.rl.validate(self.sampler.steps)?;
        self.pretrain.validate()?;
        Ok(())
    }

    /// Create the output directory and copy the config text into it.
    pub fn prepare_output(&self, raw: &str) -> Result<PathBuf> {
        let dir = self.output_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let dst = dir.join("config.json");
        std::fs::write(&dst, raw).map_err(|e| Error::io(&dst, e))?;
        Ok(dir)
    }
}
