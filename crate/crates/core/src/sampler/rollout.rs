use rayon::prelude::*;

use super::decode::{commit_step, prepare_step, Branch, DecodeState, SamplerConfig, StepInputs, StepRecord};
use super::entropy::RoutingMode;
use super::schedule::mask_schedule;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng;
use crate::world::{embed, Embedding, PromptSpec, TokenGrid, WorldConfig};

/// Full decoding record of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Index within its group.
    pub sample: usize,
    pub spec: PromptSpec,
    pub prompt: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub final_grid: TokenGrid,
    pub final_embedding: Embedding,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Branch per sample for one lockstep step, given each sample's entropy.
///
/// With routing on, the `ceil(G/2)` highest-entropy samples exploit and the
/// rest explore; entropy ties rank the lower sample index higher.
pub fn route(entropies: &[f64], mode: RoutingMode) -> Vec<Branch> {
    match mode {
        RoutingMode::Standard => vec![Branch::Standard; entropies.len()],
        RoutingMode::EntropyAll => vec![Branch::Explore; entropies.len()],
        RoutingMode::Dr => {
            let mut order: Vec<usize> = (0..entropies.len()).collect();
            order.sort_by(|&a, &b| entropies[b].total_cmp(&entropies[a]).then(a.cmp(&b)));
            let n_exploit = entropies.len().div_ceil(2);
            let mut out = vec![Branch::Explore; entropies.len()];
            for &i in &order[..n_exploit] {
                out[i] = Branch::Exploit;
            }
            out
        }
    }
}

/// Decode `group_size` samples for one prompt in lockstep.
///
/// Sample `i` draws from its own stream keyed by `(cfg.seed, i)`, so results
/// do not depend on how steps are scheduled across workers.
pub fn rollout_group(
    params: &ModelParams,
    world: &WorldConfig,
    spec: &PromptSpec,
    group_size: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Trajectory>> {
    if group_size < 2 {
        return Err(Error::GroupTooSmall(group_size));
    }
    let n = world.n_tokens();
    cfg.validate(n)?;
    let prompt = world.encode_prompt(spec)?;
    let schedule = mask_schedule(n, cfg.steps);
    let mut states: Vec<DecodeState> =
        (0..group_size).map(|_| DecodeState::new(prompt.clone(), world.height, world.width)).collect();
    let mut rngs: Vec<rng::Rng> = (0..group_size).map(|i| rng::stream(cfg.seed, &[i as u64])).collect();
    let mut records: Vec<Vec<StepRecord>> = vec![Vec::with_capacity(cfg.steps); group_size];

    for t in 1..=cfg.steps {
        let inputs: Vec<StepInputs> = states.par_iter().map(|s| prepare_step(params, s, cfg)).collect::<Result<_>>()?;
        let entropies: Vec<f64> = inputs.iter().map(|x| x.sample_entropy).collect();
        let branches = route(&entropies, cfg.routing.mode);
        let n_commit = schedule[t - 1] - schedule[t];
        let step: Vec<StepRecord> = states
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .zip(inputs.par_iter().zip(branches.par_iter()))
            .map(|((state, r), (inp, &branch))| commit_step(state, inp, branch, n_commit, cfg, r))
            .collect::<Result<_>>()?;
        for (rec, s) in records.iter_mut().zip(step) {
            rec.push(s);
        }
    }

    states
        .into_iter()
        .zip(records)
        .enumerate()
        .map(|(sample, (state, steps))| {
            let final_embedding = embed(&state.grid, world.n_colors)?;
            Ok(Trajectory { sample, spec: *spec, prompt: prompt.clone(), steps, final_grid: state.grid, final_embedding })
        })
        .collect()
}

/// Decode one sample with plain confidence sampling, seeded by `seed`.
pub fn sample_single(
    params: &ModelParams,
    world: &WorldConfig,
    spec: &PromptSpec,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<Trajectory> {
    let n = world.n_tokens();
    cfg.validate(n)?;
    let prompt = world.encode_prompt(spec)?;
    let schedule = mask_schedule(n, cfg.steps);
    let mut state = DecodeState::new(prompt.clone(), world.height, world.width);
    let mut r = rng::stream(seed, &[]);
    let mut steps = Vec::with_capacity(cfg.steps);
    for t in 1..=cfg.steps {
        let inputs = prepare_step(params, &state, cfg)?;
        steps.push(commit_step(&mut state, &inputs, Branch::Standard, schedule[t - 1] - schedule[t], cfg, &mut r)?);
    }
    let final_embedding = embed(&state.grid, world.n_colors)?;
    Ok(Trajectory { sample: 0, spec: *spec, prompt, steps, final_grid: state.grid, final_embedding })
}
