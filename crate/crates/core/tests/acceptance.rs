//! Acceptance suite, one test per criterion. Each test writes a single
//! `PASS criterion N` or `FAIL criterion N` line straight to stdout so the
//! verdicts show up even when the harness captures output.
//!
//! Criteria 7 to 9 are full RL experiments and are ignored by default:
//!
//! ```text
//! cargo test --release -p maskfocus --test acceptance -- --include-ignored --test-threads=1
//! ```

mod common;

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use maskfocus::commands::{pretrain, rl_train, RlOverrides};
use maskfocus::config::RunConfig;
use maskfocus::css::{select_critical, similarity_series, CriticalStepRecord, StepSelect};
use maskfocus::eval::EvalConfig;
use maskfocus::harness::{pretrain_base, Experiment};
use maskfocus::model::{
    forward, guided_logits, load_checkpoint, loss_and_grad, masked_log_likelihood, MaskedCompletion, ModelConfig,
    ModelParams, PolicyEval,
};
use maskfocus::pretrain::{ce_loss, ce_loss_graph, make_example, PretrainConfig};
use maskfocus::rl::{
    clipped_surrogate, compute_advantages, grpo_loss, grpo_loss_and_grad, kl_estimate, GrpoBatch, MaskMode, Objective,
    SnapshotIds, TrainConfig,
};
use maskfocus::rng;
use maskfocus::sampler::{
    mask_count, rollout_group, Branch, RoutingConfig, RoutingMode, SamplerConfig, Trajectory,
};
use maskfocus::world::{PromptSpec, RewardMode, Task, TokenGrid, WorldConfig};
use rand::Rng as _;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn verdict(n: u32, name: &str, outcome: Check) {
    let line = match &outcome {
        Ok(detail) => format!("PASS criterion {n}: {name} ({detail})"),
        Err(why) => format!("FAIL criterion {n}: {name} ({why})"),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").ok();
    out.flush().ok();
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

/// Rollouts from a small model on the full 8x8 world.
fn sampler_params(seed: u64) -> ModelParams {
    let model = ModelConfig { d_model: 16, heads: 2, layers: 1, d_ff: 32, init_std: 0.3 };
    let arch = maskfocus::model::Architecture::new(&WorldConfig::default(), &model).unwrap();
    ModelParams::init(arch, 0.3, seed)
}

fn random_spec(world: &WorldConfig, r: &mut rng::Rng) -> PromptSpec {
    let all = world.all_specs();
    all[r.random_range(0..all.len())]
}

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let start = Instant::now();
    let outcome = (|| -> Check {
        let params = common::tiny_params(101);
        ensure!(params.len() <= 5000, "{} parameters", params.len());
        let world = common::tiny_world();

        let mut r = rng::stream(5, &[]);
        let ex = make_example(&world, &PromptSpec::Counting { color: 2, n: 2 }, 0.0, &mut r).map_err(|e| e.to_string())?;
        let (_, grad) = loss_and_grad(&params, |g| ce_loss_graph(g, &ex)).map_err(|e| e.to_string())?;
        let ce_err = common::max_directional_error(&params, &grad, 20, 1e-5, |p| ce_loss(p, &ex).unwrap());
        ensure!(ce_err < 1e-5, "ce_loss relative error {ce_err:.3e}");

        // Off-policy batch so ratios, clipping and the KL term are all live.
        let old = common::shifted(&params, &common::random_direction(params.len(), 900), 3.0);
        let reference = common::shifted(&params, &common::random_direction(params.len(), 901), 1.0);
        let spec = PromptSpec::ColorAttr { tall: 1, wide: 3 };
        let sampler = SamplerConfig { steps: 5, cfg_scale: 2.0, seed: 3, ..SamplerConfig::default() };
        let trajs = rollout_group(&old, &world, &spec, 4, &sampler).map_err(|e| e.to_string())?;
        let adv = compute_advantages(&[0.1, 0.9, 0.4, 0.6]).map_err(|e| e.to_string())?;
        let mut select = rng::stream(4, &[]);
        let records = maskfocus::css::build_records(&trajs, 2, StepSelect::Critical, &mut select).map_err(|e| e.to_string())?;
        let pending = records.into_iter().map(|rec| {
            let t = &trajs[rec.trajectory];
            (rec, t.prompt.clone(), adv[t.sample])
        });
        let ids = SnapshotIds { old: 1, reference: 0 };
        let eval = PolicyEval { cfg_scale: 2.0, temperature: 1.0 };
        let batch = GrpoBatch::collect(pending.collect(), &old, &reference, ids, MaskMode::Shuffle, eval, 8)
            .map_err(|e| e.to_string())?;
        let obj = Objective { clip_eps: 0.2, kl_beta: 0.05, eval };
        let (report, grad) = grpo_loss_and_grad(&batch, &params, &obj, ids).map_err(|e| e.to_string())?;
        let grpo_err =
            common::max_directional_error(&params, &grad, 20, 1e-5, |p| grpo_loss(&batch, p, &obj, ids).unwrap().0);
        ensure!(grpo_err < 1e-4, "grpo_loss relative error {grpo_err:.3e}");
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 120.0, "took {secs:.0}s");
        Ok(format!(
            "{} params, ce {ce_err:.1e}, grpo {grpo_err:.1e}, clip_frac {:.2}, {secs:.1}s",
            params.len(),
            report.clip_frac
        ))
    })();
    verdict(1, "gradient correctness", outcome);
}

#[test]
fn criterion_02_advantage_normalization() {
    let outcome = (|| -> Check {
        let mut r = rng::stream(2, &[]);
        let mut worst_mean: f64 = 0.0;
        let mut worst_std: f64 = 0.0;
        let mut groups = 0;
        while groups < 1000 {
            let g = r.random_range(2..=16);
            let rewards: Vec<f64> = (0..g).map(|_| r.random::<f64>()).collect();
            if rewards.iter().all(|&x| x == rewards[0]) {
                continue;
            }
            groups += 1;
            let a = compute_advantages(&rewards).map_err(|e| e.to_string())?;
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            worst_mean = worst_mean.max(mean.abs());
            worst_std = worst_std.max((std - 1.0).abs());

            let c = r.random_range(-3.0..3.0);
            let shifted = compute_advantages(&rewards.iter().map(|x| x + c).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
            let d = a.iter().zip(&shifted).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            ensure!(d < 1e-9, "shift by {c} moved an advantage by {d:.3e}");
        }
        ensure!(worst_mean < 1e-9, "|mean| up to {worst_mean:.3e}");
        ensure!(worst_std <= 1e-6, "|std - 1| up to {worst_std:.3e}");

        for v in [0.0, 0.3, 1.0] {
            let a = compute_advantages(&[v; 8]).map_err(|e| e.to_string())?;
            ensure!(a.iter().all(|&x| x == 0.0), "all-equal group {v} gave {a:?}");
        }
        // Rewards on a dyadic grid with integer shifts: exact bitwise invariance.
        for _ in 0..1000 {
            let rewards: Vec<f64> = (0..8).map(|_| r.random_range(0..=8) as f64 / 8.0).collect();
            let c = r.random_range(-4..=4) as f64;
            let a = compute_advantages(&rewards).map_err(|e| e.to_string())?;
            let b = compute_advantages(&rewards.iter().map(|x| x + c).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
            ensure!(a == b, "shift by {c} changed {rewards:?}");
        }
        Ok(format!("1000 groups, max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e}"))
    })();
    verdict(2, "advantage suite", outcome);
}

/// Per-position conditional from an independent log-softmax over guided logits.
fn oracle_log_prob(params: &ModelParams, c: &MaskedCompletion, eval: PolicyEval, pos: usize) -> f64 {
    let input = c.input().unwrap();
    let cond = forward(params, &c.prompt, &input, true).unwrap();
    let logits = if eval.cfg_scale == 0.0 {
        cond
    } else {
        let uncond = forward(params, &c.prompt, &input, false).unwrap();
        guided_logits(&cond, &uncond, eval.cfg_scale)
    };
    let v = logits.n_colors;
    let row: Vec<f64> = logits.values[pos * v..(pos + 1) * v].iter().map(|x| x / eval.temperature).collect();
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row[c.tokens.tokens[pos] as usize] - lse
}

#[test]
fn criterion_03_likelihood_factorizes() {
    let outcome = (|| -> Check {
        let world = common::tiny_world();
        let mut r = rng::stream(3, &[]);
        let mut worst: f64 = 0.0;
        for i in 0..100u64 {
            let params = common::tiny_params(300 + i % 5);
            let spec = random_spec(&world, &mut r);
            let tokens: Vec<u8> = (0..world.n_tokens()).map(|_| r.random_range(0..world.n_colors as u8)).collect();
            let grid = TokenGrid::from_tokens(world.height, world.width, tokens).unwrap();
            let mut mask: Vec<bool> = (0..world.n_tokens()).map(|_| r.random_bool(0.5)).collect();
            mask[r.random_range(0..world.n_tokens())] = true;
            let c = MaskedCompletion::new(world.encode_prompt(&spec).unwrap(), grid, mask).map_err(|e| e.to_string())?;
            let eval = PolicyEval { cfg_scale: [0.0, 1.5, 4.0][i as usize % 3], temperature: 1.0 };
            let (total, per) = masked_log_likelihood(&params, &c, eval).map_err(|e| e.to_string())?;
            let oracle: f64 = c.masked_positions().iter().map(|&p| oracle_log_prob(&params, &c, eval, p)).sum();
            ensure!(per.len() == c.masked_positions().len(), "{} terms for {} masked", per.len(), c.masked_positions().len());
            worst = worst.max((total - oracle).abs());
        }
        ensure!(worst < 1e-9, "max deviation {worst:.3e}");
        Ok(format!("100 completions, max deviation {worst:.1e}"))
    })();
    verdict(3, "likelihood factorization", outcome);
}

fn check_trajectory(t: &Trajectory, n: usize, steps: usize, routing: &RoutingConfig) -> Check {
    ensure!(t.steps.len() == steps, "{} steps recorded", t.steps.len());
    let count = |m: &[bool]| m.iter().filter(|&&x| x).count();
    let mut fixed: Vec<Option<u8>> = vec![None; n];
    for (k, s) in t.steps.iter().enumerate() {
        ensure!(s.step == k + 1, "step index {}", s.step);
        ensure!(count(&s.mask_before) == mask_count(k, n, steps), "|M| before step {} is {}", s.step, count(&s.mask_before));
        let after: Vec<bool> = match t.steps.get(k + 1) {
            Some(next) => next.mask_before.clone(),
            None => t.final_grid.mask.clone(),
        };
        ensure!(count(&after) == mask_count(k + 1, n, steps), "|M| after step {} is {}", s.step, count(&after));
        ensure!(
            after.iter().zip(&s.mask_before).all(|(&a, &b)| !a || b) && count(&after) < count(&s.mask_before),
            "masks not strictly nested at step {}",
            s.step
        );
        for &(p, tok) in &s.committed {
            ensure!(s.mask_before[p] && !after[p], "position {p} committed at step {} was not masked", s.step);
            fixed[p] = Some(tok);
        }
        for (p, f) in fixed.iter().enumerate() {
            if let Some(tok) = f {
                ensure!(s.estimate.tokens[p] == *tok, "committed token at {p} changed by step {}", s.step);
            }
        }
        if s.branch == Branch::Explore {
            for &temp in &s.temperatures {
                ensure!(
                    temp > routing.theta_floor && temp <= routing.t_max + routing.theta_floor,
                    "explore temperature {temp}"
                );
            }
        }
    }
    ensure!(t.final_grid.is_fully_unmasked(), "final grid still masked");
    for (p, f) in fixed.iter().enumerate() {
        ensure!(*f == Some(t.final_grid.tokens[p]), "final token at {p} differs from its commit");
    }
    Ok(String::new())
}

#[test]
fn criterion_04_sampler_schedule() {
    let start = Instant::now();
    let outcome = (|| -> Check {
        let world = WorldConfig::default();
        let params = sampler_params(4);
        let n = world.n_tokens();
        let mut r = rng::stream(4, &[]);
        for seed in 0..100u64 {
            let group = 7 + (seed % 2) as usize;
            let cfg = SamplerConfig { seed, ..SamplerConfig::default() };
            let spec = random_spec(&world, &mut r);
            let trajs = rollout_group(&params, &world, &spec, group, &cfg).map_err(|e| e.to_string())?;
            for t in &trajs {
                check_trajectory(t, n, cfg.steps, &cfg.routing).map_err(|e| format!("seed {seed} sample {}: {e}", t.sample))?;
            }
            for k in 0..cfg.steps {
                let tagged: Vec<(Branch, f64)> = trajs.iter().map(|t| (t.steps[k].branch, t.steps[k].sample_entropy)).collect();
                let exploit: Vec<f64> = tagged.iter().filter(|x| x.0 == Branch::Exploit).map(|x| x.1).collect();
                let explore: Vec<f64> = tagged.iter().filter(|x| x.0 == Branch::Explore).map(|x| x.1).collect();
                ensure!(
                    exploit.len() == group.div_ceil(2) && explore.len() == group / 2,
                    "seed {seed} step {}: {} exploit, {} explore",
                    k + 1,
                    exploit.len(),
                    explore.len()
                );
                let lo = exploit.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = explore.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                ensure!(lo >= hi, "seed {seed} step {}: exploit entropy {lo} below explore {hi}", k + 1);
            }
        }
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 60.0, "took {secs:.0}s");
        Ok(format!("100 seeds, {secs:.1}s"))
    })();
    verdict(4, "sampler schedule suite", outcome);
}

fn oracle_select(v: &[f64], k: usize) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize)> = v.iter().enumerate().map(|(i, &x)| (x, i + 1)).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let picked: BTreeSet<usize> = pairs[..k].iter().map(|p| p.1).collect();
    picked.into_iter().collect()
}

#[test]
fn criterion_05_critical_step_oracle() {
    let outcome = (|| -> Check {
        let mut r = rng::stream(5, &[]);
        let mut ties = 0;
        for i in 0..1000 {
            let len = r.random_range(1..=20);
            let levels = r.random_range(1..=6);
            let v: Vec<f64> = (0..len).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
            let distinct: BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
            if distinct.len() < v.len() {
                ties += 1;
            }
            let k = r.random_range(1..=len);
            let got = select_critical(&v, k).map_err(|e| e.to_string())?;
            ensure!(got == oracle_select(&v, k), "series {i} {v:?} k={k}: {got:?}");
        }
        ensure!(ties > 100, "only {ties} series with ties");

        let world = WorldConfig::default();
        let params = sampler_params(5);
        let mut recorded = 0;
        for seed in 0..20u64 {
            let cfg = SamplerConfig { seed, ..SamplerConfig::default() };
            let spec = random_spec(&world, &mut r);
            for t in rollout_group(&params, &world, &spec, 8, &cfg).map_err(|e| e.to_string())? {
                let s = similarity_series(&t).map_err(|e| e.to_string())?;
                let last = s[s.len() - 1];
                ensure!((last - 1.0).abs() <= 1e-9, "S_T = {last}");
                recorded += 1;
            }
        }
        Ok(format!("1000 series ({ties} with ties), S_T on {recorded} trajectories"))
    })();
    verdict(5, "critical-step selection", outcome);
}

#[test]
fn criterion_06_grpo_identities() {
    let outcome = (|| -> Check {
        let world = common::tiny_world();
        let theta = common::tiny_params(60);
        let sampler = SamplerConfig { steps: 6, cfg_scale: 2.0, seed: 6, ..SamplerConfig::default() };
        let eval = PolicyEval { cfg_scale: 2.0, temperature: 1.0 };
        let spec = PromptSpec::Counting { color: 1, n: 2 };
        let trajs = rollout_group(&theta, &world, &spec, 8, &sampler).map_err(|e| e.to_string())?;
        let adv = compute_advantages(&[0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75]).map_err(|e| e.to_string())?;
        let mut select = rng::stream(6, &[]);
        let records: Vec<(CriticalStepRecord, Vec<usize>, f64)> =
            maskfocus::css::build_records(&trajs, 3, StepSelect::Critical, &mut select)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|rec| {
                    let t = &trajs[rec.trajectory];
                    (rec, t.prompt.clone(), adv[t.sample])
                })
                .collect();

        // theta == old == ref: first mini-batch of a collection.
        let ids = SnapshotIds { old: 0, reference: 0 };
        let batch = GrpoBatch::collect(records.clone(), &theta, &theta, ids, MaskMode::Shuffle, eval, 1)
            .map_err(|e| e.to_string())?;
        for e in &batch.entries {
            let (_, fresh) = masked_log_likelihood(&theta, &e.completion, eval).map_err(|e| e.to_string())?;
            ensure!(fresh == e.old_logp, "cached and fresh log-probs differ");
        }
        let obj = Objective { clip_eps: 0.2, kl_beta: 0.04, eval };
        let (_, report) = grpo_loss(&batch, &theta, &obj, ids).map_err(|e| e.to_string())?;
        ensure!(report.mean_ratio == 1.0 && report.max_ratio == 1.0, "ratios {} / {}", report.mean_ratio, report.max_ratio);
        ensure!(report.clip_frac == 0.0, "clip fraction {}", report.clip_frac);
        ensure!(report.kl == 0.0, "KL {} with theta == ref", report.kl);

        // Away from the reference the estimate stays non-negative.
        let mut r = rng::stream(61, &[]);
        for i in 0..50u64 {
            let moved = common::shifted(&theta, &common::random_direction(theta.len(), 600 + i), r.random_range(0.01..1.0));
            let (_, rep) = grpo_loss(&batch, &moved, &obj, ids).map_err(|e| e.to_string())?;
            ensure!(rep.kl >= -1e-12, "KL {} at perturbation {i}", rep.kl);
        }
        for _ in 0..1000 {
            let n = r.random_range(1..20);
            let a: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..0.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..0.0)).collect();
            let kl = kl_estimate(&a, &b).map_err(|e| e.to_string())?;
            ensure!(kl >= 0.0, "k3 {kl}");
            ensure!(kl_estimate(&a, &a).map_err(|e| e.to_string())? == 0.0, "k3 of identical inputs");
        }

        for a in [-1.7, -0.3, 0.0, 0.9, 2.2] {
            ensure!(clipped_surrogate(1.0, a, 0.2) == a, "on-policy surrogate for A = {a}");
        }
        ensure!(clipped_surrogate(1.3, 1.0, 0.2) == 1.2, "r=1.3 A=+1");
        ensure!(clipped_surrogate(1.3, -1.0, 0.2) == -1.3, "r=1.3 A=-1");
        Ok(format!("{} entries on-policy, {} tokens", batch.len(), report.tokens))
    })();
    verdict(6, "GRPO identities", outcome);
}

/// Setup shared by the RL experiments.
mod desk {
    use super::*;

    pub const SEED: u64 = 0;
    pub const EVAL_SEED: u64 = 1;

    pub fn world() -> WorldConfig {
        WorldConfig::default()
    }

    pub fn model() -> ModelConfig {
        ModelConfig { d_model: 64, heads: 2, layers: 2, d_ff: 128, init_std: 0.02 }
    }

    pub fn pretrain() -> PretrainConfig {
        PretrainConfig { steps: 5000, batch_size: 16, lr: 1e-3, task: Some(Task::Counting), max_count: 4, ..PretrainConfig::default() }
    }

    pub fn eval() -> EvalConfig {
        EvalConfig { tasks: vec![Task::Counting], n_per_task: 448, max_count: 4 }
    }

    pub fn rl(updates: usize) -> TrainConfig {
        TrainConfig {
            group_size: 8,
            critical_steps: 3,
            reward_mode: RewardMode::Shaped,
            task: Some(Task::Counting),
            max_count: 4,
            lr: 2e-4,
            updates,
            ..TrainConfig::default()
        }
    }

    /// Unguided sampling: the decoded distribution is the one whose
    /// likelihood is trained.
    pub fn sampler(routing: RoutingMode) -> SamplerConfig {
        let mut sampler = SamplerConfig { cfg_scale: 0.0, ..SamplerConfig::default() };
        sampler.routing.mode = routing;
        sampler
    }

    pub fn experiment(rl: TrainConfig, routing: RoutingMode, seed: u64) -> Experiment {
        let sampler = sampler(routing);
        Experiment { world: world(), sampler, rl, eval: eval(), seed, eval_seed: EVAL_SEED }
    }

    pub fn base() -> &'static ModelParams {
        static BASE: OnceLock<ModelParams> = OnceLock::new();
        BASE.get_or_init(|| pretrain_base(&world(), &model(), &pretrain(), SEED).expect("pretraining the base"))
    }

    /// Updates per run in the ablations.
    pub const ABLATION_UPDATES: usize = 300;
    pub const ABLATION_SEEDS: [u64; 3] = [11, 12, 13];

    /// Mean final strict score over the ablation seeds.
    pub fn ablation(select: StepSelect, routing: RoutingMode) -> (f64, Vec<f64>) {
        let scores: Vec<f64> = ABLATION_SEEDS
            .iter()
            .map(|&s| {
                let rl = TrainConfig { step_select: select, ..rl(ABLATION_UPDATES) };
                experiment(rl, routing, s).run(base(), |_, _| {}).expect("ablation run").trained.overall
            })
            .collect();
        (scores.iter().sum::<f64>() / scores.len() as f64, scores)
    }

    pub fn critical_dr() -> &'static (f64, Vec<f64>) {
        static RUNS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
        RUNS.get_or_init(|| ablation(StepSelect::Critical, RoutingMode::Dr))
    }
}

#[test]
#[ignore = "full RL run; use --include-ignored"]
fn criterion_07_rl_lifts_the_base() {
    let start = Instant::now();
    let outcome = (|| -> Check {
        let base = desk::base();
        let exp = desk::experiment(desk::rl(1500), RoutingMode::Dr, desk::SEED);
        ensure!(exp.sampler.steps == 12 && exp.world.n_tokens() == 64 && exp.world.n_colors == 8, "world mismatch");
        let out = exp.run(base, |_, _| {}).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let gain = out.gain();
        let detail = format!(
            "base {:.3} -> {:.3}, gain {gain:+.3}, {} updates, {:.1} min",
            out.base.overall,
            out.trained.overall,
            out.rows.len(),
            secs / 60.0
        );
        ensure!(out.rows.len() == 1500, "{} updates", out.rows.len());
        ensure!(gain >= 0.15, "{detail}");
        ensure!(secs < 3600.0, "{detail}");
        Ok(detail)
    })();
    verdict(7, "end-to-end RL gain", outcome);
}

#[test]
#[ignore = "full RL ablation; use --include-ignored"]
fn criterion_08_step_selection_ablation() {
    let outcome = (|| -> Check {
        let (critical, cs) = desk::critical_dr().clone();
        let (window, ws) = desk::ablation(StepSelect::Window, RoutingMode::Dr);
        let (earliest, es) = desk::ablation(StepSelect::Earliest, RoutingMode::Dr);
        let detail = format!("critical {critical:.3} {cs:.3?}, window {window:.3} {ws:.3?}, earliest {earliest:.3} {es:.3?}");
        ensure!(critical >= window - 0.03, "{detail}");
        ensure!(window >= earliest - 0.03, "{detail}");
        Ok(detail)
    })();
    verdict(8, "step-selection ablation", outcome);
}

#[test]
#[ignore = "full RL ablation; use --include-ignored"]
fn criterion_09_sampling_ablation() {
    let outcome = (|| -> Check {
        let (dr, ds) = desk::critical_dr().clone();
        let (standard, ss) = desk::ablation(StepSelect::Critical, RoutingMode::Standard);
        let detail = format!("dr {dr:.3} {ds:.3?}, standard {standard:.3} {ss:.3?}");
        ensure!(dr >= standard - 0.03, "{detail}");
        Ok(detail)
    })();
    verdict(9, "sampling ablation", outcome);
}

fn strip_wall_ms(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[test]
fn criterion_10_rl_train_is_deterministic() {
    let outcome = (|| -> Check {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::default();
        cfg.world = WorldConfig { height: 4, width: 4, n_colors: 4, prompt_len: 5 };
        cfg.model = ModelConfig { d_model: 8, heads: 2, layers: 1, d_ff: 16, init_std: 0.1 };
        cfg.sampler = SamplerConfig { steps: 5, ..SamplerConfig::default() };
        cfg.pretrain = PretrainConfig { steps: 10, batch_size: 4, ..PretrainConfig::default() };
        cfg.rl = TrainConfig { updates: 6, minibatches: 2, prompts_per_iteration: 2, max_count: 2, lr: 1e-2, ..TrainConfig::default() };
        cfg.seed = 10;
        cfg.output_dir = tmp.path().join("base");
        let path = tmp.path().join("config.json");
        std::fs::write(&path, cfg.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let base = pretrain(&path).map_err(|e| e.to_string())?.checkpoint;

        let run = |name: &str| -> std::result::Result<std::path::PathBuf, String> {
            let out = tmp.path().join(name);
            let o = RlOverrides { output_dir: Some(out.clone()), ..RlOverrides::default() };
            rl_train(&path, &base, &o).map_err(|e| e.to_string())?;
            Ok(out)
        };
        let (a, b) = (run("a")?, run("b")?);
        let read = |d: &Path, f: &str| std::fs::read(d.join(f)).map_err(|e| format!("{f}: {e}"));
        let log_a = String::from_utf8(read(&a, "rl_log.csv")?).unwrap();
        let log_b = String::from_utf8(read(&b, "rl_log.csv")?).unwrap();
        ensure!(log_a.lines().count() == 7, "{} log lines", log_a.lines().count());
        ensure!(strip_wall_ms(&log_a) == strip_wall_ms(&log_b), "reward curves differ");
        for f in ["checkpoints/theta.bin", "checkpoints/theta.json"] {
            ensure!(read(&a, f)? == read(&b, f)?, "{f} differs");
        }
        let (pa, _) = load_checkpoint(&a.join("checkpoints/theta.json")).map_err(|e| e.to_string())?;
        let (pb, _) = load_checkpoint(&b.join("checkpoints/theta.json")).map_err(|e| e.to_string())?;
        ensure!(pa == pb, "reloaded parameters differ");
        Ok("rl_log.csv and final checkpoint identical".into())
    })();
    verdict(10, "determinism", outcome);
}

#[test]
fn acceptance_settings_match_the_desk_scale_setup() {
    let exp = desk::experiment(desk::rl(1500), RoutingMode::Dr, desk::SEED);
    assert_eq!((exp.rl.group_size, exp.rl.critical_steps, exp.rl.reward_mode), (8, 3, RewardMode::Shaped));
    assert_eq!(exp.rl.task, Some(Task::Counting));
    assert_eq!(exp.eval.tasks, vec![Task::Counting]);
    assert!(exp.rl.validate(exp.sampler.steps).is_ok());
}
