use std::time::Instant;

use rand::Rng as _;

use super::loss::{grpo_loss_and_grad, GrpoBatch, Objective, SnapshotIds};
use super::{compute_advantages, TrainConfig};
use crate::css::{build_records, CriticalStepRecord};
use crate::error::{Error, Result};
use crate::model::{adam_step, AdamConfig, AdamState, ModelParams, PolicyEval};
use crate::rng;
use crate::sampler::{rollout_group, Branch, RoutingMode, SamplerConfig, Trajectory};
use crate::world::{reward, PromptSpec, Task, WorldConfig};

const TAG_PROMPTS: u64 = 1;
const TAG_ROLLOUT: u64 = 2;
const TAG_SELECT: u64 = 3;
const TAG_MASK: u64 = 4;

/// G trajectories of one prompt with their rewards and advantages.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRollout {
    pub spec: PromptSpec,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

pub const LOG_HEADER: &str = "iteration,mean_reward,loss,kl,clip_frac,grad_norm,wall_ms";

/// One optimizer update.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: u64,
    /// Mean training reward of the collection the update consumed.
    pub mean_reward: f64,
    pub loss: f64,
    pub kl: f64,
    pub clip_frac: f64,
    pub grad_norm: f64,
    pub wall_ms: u128,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        format!("{},{}", self.deterministic_csv(), self.wall_ms)
    }

    /// Every column except `wall_ms`.
    pub fn deterministic_csv(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.iteration, self.mean_reward, self.loss, self.kl, self.clip_frac, self.grad_norm
        )
    }
}

#[derive(Clone, Debug)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub mean_reward: f64,
    pub groups: Vec<GroupRollout>,
    pub rows: Vec<LogRow>,
    /// `selected_steps[k - 1]` counts selections of step `k`.
    pub selected_steps: Vec<usize>,
    /// Records consumed by the updates of this iteration.
    pub records_consumed: usize,
}

impl IterationMetrics {
    pub fn branch_count(&self, branch: Branch) -> usize {
        self.groups
            .iter()
            .flat_map(|g| &g.trajectories)
            .flat_map(|t| &t.steps)
            .filter(|s| s.branch == branch)
            .count()
    }
}

/// Runs collection and update phases, holding the three policies.
pub struct Trainer {
    world: WorldConfig,
    sampler: SamplerConfig,
    cfg: TrainConfig,
    seed: u64,
    theta: ModelParams,
    old: ModelParams,
    reference: ModelParams,
    adam: AdamState,
    adam_cfg: AdamConfig,
    version: u64,
    iteration: u64,
    updates: usize,
    prompts: Vec<PromptSpec>,
    /// Selected `(group, trajectory, step)` triples of the current collection.
    critical: Vec<(usize, usize, usize)>,
    replay: GrpoBatch,
}

impl Trainer {
    /// Both the trained and the reference policy start from `base`.
    pub fn new(base: ModelParams, world: WorldConfig, sampler: SamplerConfig, cfg: TrainConfig, seed: u64) -> Result<Self> {
        world.validate()?;
        sampler.validate(world.n_tokens())?;
        cfg.validate(sampler.steps)?;
        if sampler.routing.mode == RoutingMode::Dr && cfg.group_size % 2 != 0 {
            return Err(Error::Config(format!("group_size {} must be even with routing on", cfg.group_size)));
        }
        let arch = base.arch();
        if arch.n_colors != world.n_colors || arch.n_tokens() != world.n_tokens() || arch.prompt_len != world.prompt_len {
            return Err(Error::Config("base model does not match the world configuration".into()));
        }
        let tasks: Vec<Task> = cfg.task.map_or_else(|| Task::ALL.to_vec(), |t| vec![t]);
        let prompts: Vec<PromptSpec> = tasks.iter().flat_map(|&t| world.specs_for_task_capped(t, cfg.max_count)).collect();
        let adam_cfg = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
        Ok(Trainer {
            adam: AdamState::new(base.len()),
            old: base.clone(),
            reference: base.clone(),
            theta: base,
            world,
            sampler,
            cfg,
            seed,
            adam_cfg,
            version: 0,
            iteration: 0,
            updates: 0,
            prompts,
            critical: Vec::new(),
            replay: GrpoBatch::default(),
        })
    }

    pub fn theta(&self) -> &ModelParams {
        &self.theta
    }

    /// Rollout policy of the latest collection.
    pub fn old(&self) -> &ModelParams {
        &self.old
    }

    pub fn reference(&self) -> &ModelParams {
        &self.reference
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn updates_done(&self) -> usize {
        self.updates
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.updates >= self.cfg.updates
    }

    /// True between iterations: both buffers are cleared after every iteration.
    pub fn buffers_empty(&self) -> bool {
        self.critical.is_empty() && self.replay.is_empty()
    }

    pub fn objective(&self) -> Objective {
        let cfg_scale = if self.cfg.likelihood_guided { self.sampler.cfg_scale } else { 0.0 };
        Objective {
            clip_eps: self.cfg.clip_eps,
            kl_beta: self.cfg.kl_beta,
            eval: PolicyEval { cfg_scale, temperature: 1.0 },
        }
    }

    /// Roll out one group for `spec` under the current rollout policy.
    pub fn rollout(&self, spec: &PromptSpec, seed: u64) -> Result<GroupRollout> {
        let cfg = SamplerConfig { seed, ..self.sampler.clone() };
        let trajectories = rollout_group(&self.old, &self.world, spec, self.cfg.group_size, &cfg)?;
        let rewards = trajectories
            .iter()
            .map(|t| reward(&t.final_grid, spec, self.cfg.reward_mode))
            .collect::<Result<Vec<_>>>()?;
        let advantages = compute_advantages(&rewards)?;
        Ok(GroupRollout { spec: *spec, trajectories, rewards, advantages })
    }

    /// One collection followed by its mini-batch updates. Buffers are
    /// cleared on return whether or not the iteration succeeded; a failed
    /// update leaves `theta` untouched.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        let out = self.iteration_inner();
        self.critical.clear();
        self.replay = GrpoBatch::default();
        self.iteration += 1;
        out
    }

    fn iteration_inner(&mut self) -> Result<IterationMetrics> {
        let start = Instant::now();
        let it = self.iteration;
        self.old = self.theta.clone();
        let snapshot = SnapshotIds { old: self.version, reference: 0 };

        let mut pick = rng::stream(self.seed, &[TAG_PROMPTS, it]);
        let specs: Vec<PromptSpec> =
            (0..self.cfg.prompts_per_iteration).map(|_| self.prompts[pick.random_range(0..self.prompts.len())]).collect();

        let mut groups = Vec::with_capacity(specs.len());
        let mut pending: Vec<(CriticalStepRecord, Vec<usize>, f64)> = Vec::new();
        let mut selected_steps = vec![0; self.sampler.steps - 1];
        for (p, spec) in specs.iter().enumerate() {
            let group = self.rollout(spec, rng::derive_seed(self.seed, &[TAG_ROLLOUT, it, p as u64]))?;
            let mut select = rng::stream(self.seed, &[TAG_SELECT, it, p as u64]);
            let records = build_records(&group.trajectories, self.cfg.critical_steps, self.cfg.step_select, &mut select)?;
            for rec in records {
                self.critical.push((p, rec.trajectory, rec.step));
                selected_steps[rec.step - 1] += 1;
                let traj = &group.trajectories[rec.trajectory];
                pending.push((rec, traj.prompt.clone(), group.advantages[traj.sample]));
            }
            groups.push(group);
        }
        let n_rewards: usize = groups.iter().map(|g| g.rewards.len()).sum();
        let mean_reward = groups.iter().flat_map(|g| &g.rewards).sum::<f64>() / n_rewards as f64;

        let obj = self.objective();
        self.replay = GrpoBatch::collect(
            pending,
            &self.old,
            &self.reference,
            snapshot,
            self.cfg.mask_mode,
            obj.eval,
            rng::derive_seed(self.seed, &[TAG_MASK, it]),
        )?;

        let n = self.replay.len();
        let per = n.div_ceil(self.cfg.minibatches);
        let mut rows = Vec::new();
        let mut consumed = 0;
        'epochs: for _ in 0..self.cfg.epochs {
            for lo in (0..n).step_by(per.max(1)) {
                if self.is_finished() {
                    break 'epochs;
                }
                let mb = self.replay.slice(lo..(lo + per).min(n));
                let (report, grads) = grpo_loss_and_grad(&mb, &self.theta, &obj, snapshot)?;
                adam_step(&mut self.theta, &grads, &mut self.adam, &self.adam_cfg)?;
                self.version += 1;
                self.updates += 1;
                consumed += mb.len();
                rows.push(LogRow {
                    iteration: it,
                    mean_reward,
                    loss: report.loss,
                    kl: report.kl,
                    clip_frac: report.clip_frac,
                    grad_norm: report.grad_norm,
                    wall_ms: start.elapsed().as_millis(),
                });
            }
        }
        Ok(IterationMetrics { iteration: it, mean_reward, groups, rows, selected_steps, records_consumed: consumed })
    }

    /// Iterate until the configured number of updates, calling `on_iteration`
    /// after each one.
    pub fn run(&mut self, mut on_iteration: impl FnMut(&Trainer, &IterationMetrics) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let m = self.train_iteration()?;
            on_iteration(self, &m)?;
        }
        Ok(())
    }
}
