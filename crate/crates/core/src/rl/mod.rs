//! Group relative policy optimization over critical decoding steps.

mod loss;
mod trainer;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::css::StepSelect;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::world::{RewardMode, Task};

pub use loss::{grpo_loss, grpo_loss_and_grad, BatchEntry, GrpoBatch, LossReport, Objective, SnapshotIds};
pub use trainer::{GroupRollout, IterationMetrics, LogRow, Trainer, LOG_HEADER};

/// Groups whose population reward std is at or below this get zero advantages.
pub const DEGENERATE_STD: f64 = 1e-6;

/// Population-normalized group advantages `(R - mean) / std`.
pub fn compute_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= DEGENERATE_STD {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// A uniformly random mask with as many masked positions as `mask`.
pub fn shuffle_mask(mask: &[bool], rng: &mut Rng) -> Vec<bool> {
    let k = mask.iter().filter(|&&m| m).count();
    let mut out = vec![false; mask.len()];
    for i in sample(rng, mask.len(), k) {
        out[i] = true;
    }
    out
}

/// Mean per-token `exp(ref - theta) - (ref - theta) - 1`.
pub fn kl_estimate(logp_theta: &[f64], logp_ref: &[f64]) -> Result<f64> {
    if logp_theta.len() != logp_ref.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} log-probs", logp_theta.len(), logp_ref.len())));
    }
    if logp_theta.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logp_theta.iter().zip(logp_ref).map(|(t, r)| k3(r - t)).sum();
    Ok(total / logp_theta.len() as f64)
}

/// Per-token `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

fn k3(d: f64) -> f64 {
    d.exp() - d - 1.0
}

/// How the re-masked completion picks its masked positions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Fresh uniform mask of the same size.
    #[default]
    Shuffle,
    /// The trajectory's own mask at the selected step.
    Trajectory,
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(MaskMode::Shuffle),
            "trajectory" => Ok(MaskMode::Trajectory),
            _ => Err(Error::Config(format!("unknown mask mode {s:?} (shuffle, trajectory)"))),
        }
    }
}

/// GRPO hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Samples per prompt G.
    pub group_size: usize,
    /// Optimized steps per trajectory K.
    pub critical_steps: usize,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub lr: f64,
    /// Prompt groups rolled out per collection.
    pub prompts_per_iteration: usize,
    /// Mini-batches the collected records are split into.
    pub minibatches: usize,
    /// Passes over the collected records.
    pub epochs: usize,
    /// Total optimizer updates of a run.
    pub updates: usize,
    /// Evaluate likelihoods under the guided distribution.
    pub likelihood_guided: bool,
    pub mask_mode: MaskMode,
    pub step_select: StepSelect,
    pub reward_mode: RewardMode,
    /// Restrict training prompts to one task.
    pub task: Option<Task>,
    /// Largest object count among training prompts.
    pub max_count: u32,
    /// Save a theta checkpoint every this many updates (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            group_size: 8,
            critical_steps: 3,
            clip_eps: 0.2,
            kl_beta: 0.01,
            lr: 1e-4,
            prompts_per_iteration: 1,
            minibatches: 1,
            epochs: 1,
            updates: 1500,
            likelihood_guided: true,
            mask_mode: MaskMode::Shuffle,
            step_select: StepSelect::Critical,
            reward_mode: RewardMode::Shaped,
            task: Some(Task::Counting),
            max_count: 4,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, steps: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.group_size < 2 {
            return bad(format!("group_size {} must be >= 2", self.group_size));
        }
        if self.critical_steps == 0 || self.critical_steps >= steps {
            return bad(format!("critical_steps {} must be in 1..{steps}", self.critical_steps));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!("clip_eps {} must be in (0, 1)", self.clip_eps));
        }
        if !(self.kl_beta >= 0.0) || !(self.lr > 0.0) {
            return bad("kl_beta must be >= 0 and lr > 0".into());
        }
        if self.prompts_per_iteration == 0 || self.minibatches == 0 || self.epochs == 0 {
            return bad("prompts_per_iteration, minibatches and epochs must be positive".into());
        }
        if self.max_count == 0 {
            return bad("max_count must be positive".into());
        }
        Ok(())
    }
}
