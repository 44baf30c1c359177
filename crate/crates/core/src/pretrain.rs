//! Masked-token cross-entropy pretraining of the base model.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{adam_step, forward_graph, loss_and_grad_sum, AdamConfig, AdamState, Graph, ModelParams, Var};
use crate::rng::{self, Rng};
use crate::sampler::gamma;
use crate::world::{generate_scene, PromptSpec, Task, TokenGrid, WorldConfig};

/// Pretraining hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Probability of replacing the prompt by the null prompt.
    pub prompt_dropout: f64,
    /// Restrict training prompts to one task.
    pub task: Option<Task>,
    /// Largest object count among training prompts.
    pub max_count: u32,
    /// Append a CSV row every this many steps.
    pub log_every: usize,
    /// Save a checkpoint every this many steps (0 disables).
    pub checkpoint_every: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 20_000,
            batch_size: 32,
            lr: 1e-3,
            prompt_dropout: 0.1,
            task: None,
            max_count: 8,
            log_every: 100,
            checkpoint_every: 500,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.lr > 0.0) || !(0.0..=1.0).contains(&self.prompt_dropout) || self.max_count == 0 {
            return Err(Error::Config(format!("invalid pretraining config: {self:?}")));
        }
        Ok(())
    }

    /// Specs the data generator draws from.
    pub fn prompt_pool(&self, world: &WorldConfig) -> Vec<PromptSpec> {
        let tasks: Vec<Task> = self.task.map_or_else(|| Task::ALL.to_vec(), |t| vec![t]);
        tasks.iter().flat_map(|&t| world.specs_for_task_capped(t, self.max_count)).collect()
    }
}

/// A ground-truth scene with a random mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainExample {
    pub prompt: Vec<usize>,
    pub grid: TokenGrid,
    pub mask: Vec<bool>,
    /// Train the unconditional branch on this example.
    pub dropout: bool,
}

/// Masked positions for progress `u`: `round(N * gamma(u))`, at least one.
pub fn mask_size(n: usize, u: f64) -> usize {
    ((n as f64 * gamma(u)).round() as usize).clamp(1, n)
}

/// Example with explicit mask progress `u` and dropout decision.
pub fn make_example_at(
    world: &WorldConfig,
    spec: &PromptSpec,
    u: f64,
    dropout: bool,
    rng: &mut Rng,
) -> Result<PretrainExample> {
    let grid = generate_scene(world, spec, rng.random())?;
    let n = world.n_tokens();
    let mut mask = vec![false; n];
    for i in sample(rng, n, mask_size(n, u)) {
        mask[i] = true;
    }
    Ok(PretrainExample { prompt: world.encode_prompt(spec)?, grid, mask, dropout })
}

/// Example with `u ~ U(0, 1)` and prompt dropout at probability `dropout_p`.
pub fn make_example(world: &WorldConfig, spec: &PromptSpec, dropout_p: f64, rng: &mut Rng) -> Result<PretrainExample> {
    let u: f64 = rng.random();
    let dropout = rng.random::<f64>() < dropout_p;
    make_example_at(world, spec, u, dropout, rng)
}

/// Mean negative log-likelihood of the masked targets, as a graph node.
pub fn ce_loss_graph(g: &mut Graph, ex: &PretrainExample) -> Result<Var> {
    let positions: Vec<usize> = ex.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect();
    if positions.is_empty() {
        return Err(Error::EmptyMask);
    }
    let input = ex.grid.with_mask(&ex.mask)?;
    let logits = forward_graph(g, &ex.prompt, &input, !ex.dropout)?;
    let lsm = g.log_softmax(logits);
    let at = positions.iter().map(|&p| (p, ex.grid.tokens[p] as usize)).collect();
    let picked = g.pick(lsm, at);
    let total = g.sum(picked);
    Ok(g.scale(total, -1.0 / positions.len() as f64))
}

pub fn ce_loss(params: &ModelParams, ex: &PretrainExample) -> Result<f64> {
    let mut g = Graph::new(params);
    let v = ce_loss_graph(&mut g, ex)?;
    Ok(g.scalar(v))
}

/// Stateful pretraining loop over on-the-fly generated data.
pub struct Pretrainer {
    world: WorldConfig,
    cfg: PretrainConfig,
    seed: u64,
    params: ModelParams,
    adam: AdamState,
    adam_cfg: AdamConfig,
    pool: Vec<PromptSpec>,
    step: usize,
}

impl Pretrainer {
    pub fn new(params: ModelParams, world: WorldConfig, cfg: PretrainConfig, seed: u64) -> Result<Self> {
        world.validate()?;
        cfg.validate()?;
        let pool = cfg.prompt_pool(&world);
        let adam_cfg = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
        Ok(Pretrainer { adam: AdamState::new(params.len()), params, world, cfg, seed, adam_cfg, pool, step: 0 })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &PretrainConfig {
        &self.cfg
    }

    /// The batch used at `step`; independent of everything but the seed.
    pub fn batch(&self, step: usize) -> Result<Vec<PretrainExample>> {
        (0..self.cfg.batch_size)
            .into_par_iter()
            .map(|b| {
                let mut r = rng::stream(self.seed, &[step as u64, b as u64]);
                let spec = self.pool[r.random_range(0..self.pool.len())];
                make_example(&self.world, &spec, self.cfg.prompt_dropout, &mut r)
            })
            .collect()
    }

    /// One Adam update; returns the batch-mean CE before the update. On
    /// error the parameters are left as they were.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.batch(self.step)?;
        let (sum, mut grads) = loss_and_grad_sum(&self.params, &batch, |g, ex| ce_loss_graph(g, ex))?;
        let b = batch.len() as f64;
        grads.iter_mut().for_each(|x| *x /= b);
        adam_step(&mut self.params, &grads, &mut self.adam, &self.adam_cfg)?;
        self.step += 1;
        Ok(sum / b)
    }

    /// Mean CE over `n` fixed held-out examples.
    pub fn held_out_ce(&self, n: usize) -> Result<f64> {
        let losses = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(self.seed ^ 0x5eed_0ff5_e7, &[i as u64]);
                let spec = self.pool[r.random_range(0..self.pool.len())];
                ce_loss(&self.params, &make_example(&self.world, &spec, 0.0, &mut r)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(losses.iter().sum::<f64>() / n.max(1) as f64)
    }
}
