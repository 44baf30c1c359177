//! End-to-end experiments: pretrain a base, post-train it with GRPO and
//! compare strict evaluation before and after.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{evaluate, EvalConfig, EvalSummary};
use crate::model::{quantize_f32, Architecture, ModelConfig, ModelParams};
use crate::pretrain::{PretrainConfig, Pretrainer};
use crate::rl::{LogRow, TrainConfig, Trainer};
use crate::sampler::SamplerConfig;
use crate::world::WorldConfig;

/// Pretrain from a fresh initialization. The result is rounded through f32
/// so it matches a saved and reloaded checkpoint.
pub fn pretrain_base(world: &WorldConfig, model: &ModelConfig, cfg: &PretrainConfig, seed: u64) -> Result<ModelParams> {
    let arch = Architecture::new(world, model)?;
    let mut p = Pretrainer::new(ModelParams::init(arch, model.init_std, seed), world.clone(), cfg.clone(), seed)?;
    for _ in 0..cfg.steps {
        p.train_step()?;
    }
    let mut params = p.into_params();
    quantize_f32(&mut params);
    Ok(params)
}

/// Everything an RL experiment needs besides the base model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub world: WorldConfig,
    pub sampler: SamplerConfig,
    pub rl: TrainConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    /// Seed of the evaluation samples, shared by base and final scores.
    pub eval_seed: u64,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub base: EvalSummary,
    pub trained: EvalSummary,
    pub rows: Vec<LogRow>,
    /// Mean training reward of each collection.
    pub reward_curve: Vec<f64>,
    pub params: ModelParams,
}

impl Outcome {
    pub fn gain(&self) -> f64 {
        self.trained.overall - self.base.overall
    }
}

impl Experiment {
    pub fn evaluate(&self, params: &ModelParams) -> Result<EvalSummary> {
        evaluate(params, &self.world, &self.sampler, &self.eval, self.eval_seed)
    }

    /// Post-train `base`, calling `progress(updates, mean_reward)` after each collection.
    pub fn run(&self, base: &ModelParams, mut progress: impl FnMut(usize, f64)) -> Result<Outcome> {
        let before = self.evaluate(base)?;
        let mut trainer = Trainer::new(base.clone(), self.world.clone(), self.sampler.clone(), self.rl.clone(), self.seed)?;
        let mut rows = Vec::new();
        let mut reward_curve = Vec::new();
        trainer.run(|t, m| {
            rows.extend(m.rows.iter().cloned());
            reward_curve.push(m.mean_reward);
            progress(t.updates_done(), m.mean_reward);
            Ok(())
        })?;
        let mut params = trainer.theta().clone();
        quantize_f32(&mut params);
        let trained = self.evaluate(&params)?;
        Ok(Outcome { base: before, trained, rows, reward_curve, params })
    }
}
