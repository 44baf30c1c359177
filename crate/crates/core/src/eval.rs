//! Strict-reward evaluation: per-task means and an overall mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng;
use crate::sampler::{sample_single, RoutingMode, SamplerConfig};
use crate::world::{reward, PromptSpec, RewardMode, Task, TokenGrid, WorldConfig};

/// Which prompts are evaluated and how many samples each task gets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Tasks evaluated; empty means all five.
    pub tasks: Vec<Task>,
    pub n_per_task: usize,
    /// Largest object count among counting prompts.
    pub max_count: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { tasks: Vec::new(), n_per_task: 64, max_count: 4 }
    }
}

impl EvalConfig {
    /// `"all"` or a comma-separated list of task names.
    pub fn with_suite(mut self, suite: &str) -> Result<Self> {
        self.tasks = if suite == "all" {
            Vec::new()
        } else {
            suite.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?
        };
        Ok(self)
    }

    pub fn task_list(&self) -> Vec<Task> {
        if self.tasks.is_empty() {
            Task::ALL.to_vec()
        } else {
            self.tasks.clone()
        }
    }

    /// The `(task, spec)` sequence evaluated: each task cycles through its specs.
    pub fn prompts(&self, world: &WorldConfig) -> Vec<PromptSpec> {
        let mut out = Vec::new();
        for task in self.task_list() {
            let specs = world.specs_for_task_capped(task, self.max_count);
            out.extend((0..self.n_per_task).map(|i| specs[i % specs.len()]));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: Task,
    pub n: usize,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub tasks: Vec<TaskScore>,
    /// Mean over tasks.
    pub overall: f64,
}

impl EvalSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,n,mean_reward\n");
        for t in &self.tasks {
            s.push_str(&format!("{},{},{:.6}\n", t.task.name(), t.n, t.mean_reward));
        }
        s.push_str(&format!("overall,{},{:.6}\n", self.tasks.iter().map(|t| t.n).sum::<usize>(), self.overall));
        s
    }

    pub fn score(&self, task: Task) -> Option<f64> {
        self.tasks.iter().find(|t| t.task == task).map(|t| t.mean_reward)
    }
}

/// Score grids produced by `generate(spec, index)` with the strict reward.
pub fn evaluate_with<G>(world: &WorldConfig, cfg: &EvalConfig, generate: G) -> Result<EvalSummary>
where
    G: Fn(&PromptSpec, usize) -> Result<TokenGrid> + Sync,
{
    if cfg.n_per_task == 0 {
        return Err(Error::Config("n_per_task must be positive".into()));
    }
    let prompts = cfg.prompts(world);
    let rewards = prompts
        .par_iter()
        .enumerate()
        .map(|(i, spec)| reward(&generate(spec, i)?, spec, RewardMode::Strict))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<TaskScore> = cfg
        .task_list()
        .into_iter()
        .enumerate()
        .map(|(k, task)| {
            let chunk = &rewards[k * cfg.n_per_task..(k + 1) * cfg.n_per_task];
            TaskScore { task, n: chunk.len(), mean_reward: chunk.iter().sum::<f64>() / chunk.len() as f64 }
        })
        .collect();
    let overall = tasks.iter().map(|t| t.mean_reward).sum::<f64>() / tasks.len() as f64;
    Ok(EvalSummary { tasks, overall })
}

/// Evaluate a model with plain confidence sampling; sample `i` is seeded by `(seed, i)`.
pub fn evaluate(
    params: &ModelParams,
    world: &WorldConfig,
    sampler: &SamplerConfig,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EvalSummary> {
    let mut sampler = sampler.clone();
    sampler.routing.mode = RoutingMode::Standard;
    evaluate_with(world, cfg, |spec, i| {
        Ok(sample_single(params, world, spec, &sampler, rng::derive_seed(seed, &[i as u64]))?.final_grid)
    })
}
