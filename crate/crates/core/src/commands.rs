//! Command implementations behind the `maskfocus` binary.
//!
//! Each `cmd_*` function returns a process exit code: 0 on success, 2 for
//! configuration or input errors, 3 when training hit a non-finite value and
//! 1 for anything else.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::css::{information_gain, select_critical, StepSelect};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalSummary};
use crate::model::{load_checkpoint, save_checkpoint, Architecture, ModelParams};
use crate::pretrain::Pretrainer;
use crate::rl::{MaskMode, Trainer, LOG_HEADER};
use crate::rng;
use crate::sampler::{
    read_trajectory_jsonl, rollout_group, sample_single, trajectory_jsonl, RoutingMode, SamplerConfig, Trajectory,
};
use crate::world::{write_ppm, PromptSpec, WorldConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_) => EXIT_NUMERIC,
        Error::Config(_)
        | Error::InvalidSpec(_)
        | Error::UnsatisfiableSpec(_)
        | Error::MalformedInput(_)
        | Error::Checkpoint(_)
        | Error::Json(_)
        | Error::Io { .. }
        | Error::KOutOfRange { .. }
        | Error::TooShort { .. }
        | Error::GroupTooSmall(_)
        | Error::IncompleteTrajectory(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn finish<T>(r: Result<T>) -> i32 {
    match r {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// World shape implied by a model architecture.
pub fn world_of(arch: &Architecture) -> WorldConfig {
    WorldConfig {
        height: arch.grid_height,
        width: arch.grid_width,
        n_colors: arch.n_colors,
        prompt_len: arch.prompt_len,
    }
}

/// Outcome of a pretraining run.
#[derive(Clone, Debug)]
pub struct PretrainOutput {
    pub checkpoint: PathBuf,
    pub final_ce: f64,
}

/// Pretrain from a fresh initialization; writes `pretrain_log.csv`,
/// periodic checkpoints and `base.{json,bin}` under the output directory.
pub fn pretrain(config_path: &Path) -> Result<PretrainOutput> {
    let (cfg, raw) = RunConfig::load(config_path)?;
    let dir = cfg.prepare_output(&raw)?;
    let arch = Architecture::new(&cfg.world, &cfg.model)?;
    let params = ModelParams::init(arch, cfg.model.init_std, cfg.seed);
    let mut trainer = Pretrainer::new(params, cfg.world.clone(), cfg.pretrain.clone(), cfg.seed)?;
    let log_every = cfg.pretrain.log_every.max(1);
    let mut log = String::from("step,loss,wall_ms\n");
    let (mut window, mut count) = (0.0, 0);
    let start = Instant::now();
    while trainer.step_count() < cfg.pretrain.steps {
        let loss = match trainer.train_step() {
            Ok(l) => l,
            Err(e) => {
                save_checkpoint(trainer.params(), &dir.join("base"), cfg.seed, trainer.step_count() as u64)?;
                write(&dir.join("pretrain_log.csv"), &log)?;
                return Err(e);
            }
        };
        window += loss;
        count += 1;
        let step = trainer.step_count();
        if step % log_every == 0 || step == cfg.pretrain.steps {
            writeln!(log, "{step},{:.8},{}", window / count as f64, start.elapsed().as_millis()).ok();
            (window, count) = (0.0, 0);
        }
        if cfg.pretrain.checkpoint_every > 0 && step % cfg.pretrain.checkpoint_every == 0 {
            save_checkpoint(trainer.params(), &dir.join("checkpoints").join(format!("base_{step:06}")), cfg.seed, step as u64)?;
        }
    }
    write(&dir.join("pretrain_log.csv"), &log)?;
    let final_ce = trainer.held_out_ce(256)?;
    let checkpoint = save_checkpoint(trainer.params(), &dir.join("base"), cfg.seed, trainer.step_count() as u64)?;
    let summary = serde_json::json!({ "steps": trainer.step_count(), "final_ce": final_ce });
    write(&dir.join("pretrain_summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(PretrainOutput { checkpoint, final_ce })
}

pub fn cmd_pretrain(config_path: &Path) -> i32 {
    finish(pretrain(config_path).map(|o| println!("final CE {:.4}; checkpoint {}", o.final_ce, o.checkpoint.display())))
}

/// Command-line switches layered over the config file.
#[derive(Clone, Debug, Default)]
pub struct RlOverrides {
    pub step_select: Option<StepSelect>,
    pub sampling: Option<RoutingMode>,
    pub cfg_scale: Option<f64>,
    pub mask_mode: Option<MaskMode>,
    pub updates: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Evaluate the base and final policies with the config's eval section.
    pub eval: bool,
}

impl RlOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.step_select {
            cfg.rl.step_select = s;
        }
        if let Some(m) = self.sampling {
            cfg.sampler.routing.mode = m;
        }
        if let Some(s) = self.cfg_scale {
            cfg.sampler.cfg_scale = s;
        }
        if let Some(m) = self.mask_mode {
            cfg.rl.mask_mode = m;
        }
        if let Some(u) = self.updates {
            cfg.rl.updates = u;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()
    }
}

#[derive(Clone, Debug)]
pub struct RlOutput {
    pub output_dir: PathBuf,
    pub updates: usize,
    pub base_eval: Option<EvalSummary>,
    pub final_eval: Option<EvalSummary>,
}

/// GRPO post-training from a base checkpoint.
///
/// Writes `rl_log.csv` (one row per update), `selected_steps.csv`,
/// `trajectories.jsonl` (last collection), checkpoints `theta`, `old` and
/// `ref`, and with `eval` set, `eval.json`.
pub fn rl_train(config_path: &Path, base: &Path, overrides: &RlOverrides) -> Result<RlOutput> {
    let (mut cfg, raw) = RunConfig::load(config_path)?;
    overrides.apply(&mut cfg)?;
    let dir = cfg.prepare_output(&raw)?;
    write(&dir.join("effective_config.json"), cfg.to_json()? + "\n")?;
    let (params, _) = load_checkpoint(base)?;
    let world = world_of(params.arch());
    if world != cfg.world {
        return Err(Error::Config("base checkpoint does not match the world section".into()));
    }
    let base_eval = if overrides.eval { Some(evaluate(&params, &world, &cfg.sampler, &cfg.eval, cfg.seed)?) } else { None };

    let mut trainer = Trainer::new(params, world.clone(), cfg.sampler.clone(), cfg.rl.clone(), cfg.seed)?;
    let ckpt = dir.join("checkpoints");
    let mut log = format!("{LOG_HEADER}\n");
    let mut histogram = vec![0usize; cfg.sampler.steps - 1];
    let mut last: Vec<Trajectory> = Vec::new();
    let every = cfg.rl.checkpoint_every;
    let run = trainer.run(|t, m| {
        for r in &m.rows {
            log.push_str(&r.to_csv());
            log.push('\n');
        }
        histogram.iter_mut().zip(&m.selected_steps).for_each(|(h, s)| *h += s);
        last = m.groups.iter().flat_map(|g| g.trajectories.iter().cloned()).collect();
        let u = t.updates_done();
        if every > 0 && m.rows.len() > 0 && (u / every) > ((u - m.rows.len()) / every) {
            save_checkpoint(t.theta(), &ckpt.join(format!("theta_{u:06}")), cfg.seed, u as u64)?;
        }
        Ok(())
    });
    write(&dir.join("rl_log.csv"), &log)?;
    let mut hist = String::from("step,count\n");
    for (k, c) in histogram.iter().enumerate() {
        writeln!(hist, "{},{c}", k + 1).ok();
    }
    write(&dir.join("selected_steps.csv"), hist)?;
    run?;
    if !last.is_empty() {
        write(&dir.join("trajectories.jsonl"), trajectory_jsonl(&last)?)?;
    }
    let step = trainer.updates_done() as u64;
    save_checkpoint(trainer.theta(), &ckpt.join("theta"), cfg.seed, step)?;
    save_checkpoint(trainer.old(), &ckpt.join("old"), cfg.seed, step)?;
    save_checkpoint(trainer.reference(), &ckpt.join("ref"), cfg.seed, 0)?;

    let final_eval = if overrides.eval {
        let (theta, _) = load_checkpoint(&ckpt.join("theta"))?;
        let e = evaluate(&theta, &world, &cfg.sampler, &cfg.eval, cfg.seed)?;
        let summary = serde_json::json!({ "base": base_eval, "final": e });
        write(&dir.join("eval.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        Some(e)
    } else {
        None
    };
    Ok(RlOutput { output_dir: dir, updates: trainer.updates_done(), base_eval, final_eval })
}

pub fn cmd_rl_train(config_path: &Path, base: &Path, overrides: &RlOverrides) -> i32 {
    finish(rl_train(config_path, base, overrides).map(|o| {
        println!("{} updates; output in {}", o.updates, o.output_dir.display());
        if let (Some(b), Some(f)) = (o.base_eval, o.final_eval) {
            println!("strict eval: base {:.4} -> final {:.4}", b.overall, f.overall);
        }
    }))
}

/// Optional sampler section from a config file, with command-line overrides.
pub fn sampler_from(config: Option<&Path>, cfg_scale: Option<f64>, sampling: Option<RoutingMode>) -> Result<SamplerConfig> {
    let mut s = match config {
        Some(p) => RunConfig::load(p)?.0.sampler,
        None => SamplerConfig::default(),
    };
    if let Some(c) = cfg_scale {
        s.cfg_scale = c;
    }
    if let Some(m) = sampling {
        s.routing.mode = m;
    }
    Ok(s)
}

/// Decode `n` samples for one prompt; writes `sample_<i>.ppm` and
/// `trajectories.jsonl`, plus per-step estimate images when `debug_ppm` is set.
pub fn sample(
    checkpoint: &Path,
    spec: &PromptSpec,
    n: usize,
    sampler: &SamplerConfig,
    out_dir: &Path,
    debug_ppm: bool,
) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::Config("--n must be positive".into()));
    }
    let (params, _) = load_checkpoint(checkpoint)?;
    let world = world_of(params.arch());
    let trajs = if n >= 2 {
        rollout_group(&params, &world, spec, n, sampler)?
    } else {
        vec![sample_single(&params, &world, spec, sampler, rng::derive_seed(sampler.seed, &[0]))?]
    };
    for t in &trajs {
        t.final_grid.validate(world.n_colors)?;
        write(&out_dir.join(format!("sample_{:03}.ppm", t.sample)), write_ppm(&t.final_grid, 8))?;
        if debug_ppm {
            for s in &t.steps {
                let name = format!("sample_{:03}_step_{:02}.ppm", t.sample, s.step);
                write(&out_dir.join(name), write_ppm(&s.estimate, 8))?;
            }
        }
    }
    write(&out_dir.join("trajectories.jsonl"), trajectory_jsonl(&trajs)?)?;
    Ok(trajs)
}

pub fn cmd_sample(checkpoint: &Path, spec: &str, n: usize, sampler: &SamplerConfig, out_dir: &Path, debug_ppm: bool) -> i32 {
    let run = || -> Result<()> {
        let spec: PromptSpec =
            serde_json::from_str(spec).map_err(|e| Error::Config(format!("prompt spec {spec:?}: {e}")))?;
        let trajs = sample(checkpoint, &spec, n, sampler, out_dir, debug_ppm)?;
        println!("{} samples written to {}", trajs.len(), out_dir.display());
        Ok(())
    };
    finish(run())
}

/// Per-step similarity, information gain, entropy and critical-step flags
/// for every sample of a trajectory export.
pub fn analyze(trajectory_file: &Path, k: usize) -> Result<String> {
    let text = fs::read_to_string(trajectory_file).map_err(|e| Error::io(trajectory_file, e))?;
    let lines = read_trajectory_jsonl(&text)?;
    if lines.is_empty() {
        return Err(Error::MalformedInput("no trajectory records".into()));
    }
    let mut by_sample: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for l in lines {
        by_sample.entry(l.sample).or_default().push(l);
    }
    let mut out = String::from("sample,step,S_t,V_t,entropy,branch,n_masked,selected\n");
    for (sample, mut steps) in by_sample {
        steps.sort_by_key(|l| l.step);
        if steps.iter().enumerate().any(|(i, l)| l.step != i + 1) {
            return Err(Error::MalformedInput(format!("sample {sample}: steps are not 1..T")));
        }
        let s: Vec<f64> = steps.iter().map(|l| l.s_t).collect();
        let v = information_gain(&s)?;
        let selected = select_critical(&v, k)?;
        for (i, l) in steps.iter().enumerate() {
            let vt = v.get(i).map(|x| format!("{x:.12}")).unwrap_or_default();
            let branch = serde_json::to_value(l.branch)?;
            writeln!(
                out,
                "{sample},{},{:.12},{vt},{:.12},{},{},{}",
                l.step,
                l.s_t,
                l.entropy,
                branch.as_str().unwrap_or_default(),
                l.n_masked,
                u8::from(selected.contains(&l.step))
            )
            .ok();
        }
    }
    Ok(out)
}

pub fn cmd_analyze(trajectory_file: &Path, k: usize, out: &Path) -> i32 {
    finish(analyze(trajectory_file, k).and_then(|csv| write(out, csv)))
}

/// Strict evaluation of a checkpoint; writes `eval.csv` and `eval.json`.
pub fn eval(checkpoint: &Path, cfg: &EvalConfig, sampler: &SamplerConfig, seed: u64, out_dir: &Path) -> Result<EvalSummary> {
    let (params, _) = load_checkpoint(checkpoint)?;
    let world = world_of(params.arch());
    let summary = evaluate(&params, &world, sampler, cfg, seed)?;
    write(&out_dir.join("eval.csv"), summary.to_csv())?;
    write(&out_dir.join("eval.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

pub fn cmd_eval(checkpoint: &Path, cfg: &EvalConfig, sampler: &SamplerConfig, seed: u64, out_dir: &Path) -> i32 {
    finish(eval(checkpoint, cfg, sampler, seed, out_dir).map(|s| print!("{}", s.to_csv())))
}
