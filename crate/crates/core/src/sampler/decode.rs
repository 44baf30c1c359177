use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::entropy::{dynamic_temperature, sample_entropy, token_entropy, RoutingConfig};
use super::schedule::mask_schedule;
use crate::error::{Error, Result};
use crate::model::{forward, guided_logits, softmax, LogitsGrid, ModelParams};
use crate::rng::Rng;
use crate::world::{embed, Embedding, Token, TokenGrid};

/// Decoding hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Total decoding steps T.
    pub steps: usize,
    pub cfg_scale: f64,
    /// Temperature of the standard (confidence-based) branch.
    pub temperature: f64,
    pub routing: RoutingConfig,
    /// Scale of Gumbel noise added to log-confidence; 0 disables it.
    pub gumbel_noise: f64,
    /// Measure entropy on the guided distribution (otherwise on the conditional one).
    pub entropy_from_guided: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 12,
            cfg_scale: 5.0,
            temperature: 1.0,
            routing: RoutingConfig::default(),
            gumbel_noise: 0.0,
            entropy_from_guided: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, n_tokens: usize) -> Result<()> {
        if self.steps < 2 || self.steps > n_tokens {
            return Err(Error::Config(format!("steps {} must be in 2..={n_tokens}", self.steps)));
        }
        if !(self.temperature > 0.0) || !(self.cfg_scale >= 0.0) || !(self.gumbel_noise >= 0.0) {
            return Err(Error::Config("temperature must be > 0, cfg_scale and gumbel_noise >= 0".into()));
        }
        self.routing.validate()
    }
}

/// Sampling branch applied to one sample at one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Confidence sampling chosen by routing (high-entropy half).
    Exploit,
    /// Entropy-modulated temperature (low-entropy half).
    Explore,
    /// Confidence sampling with routing off.
    Standard,
}

/// A partially decoded sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    pub prompt: Vec<usize>,
    /// Committed tokens; `mask[i]` marks positions still to decode.
    pub grid: TokenGrid,
    /// Steps completed so far.
    pub step: usize,
}

impl DecodeState {
    pub fn new(prompt: Vec<usize>, height: usize, width: usize) -> Self {
        DecodeState { prompt, grid: TokenGrid::fully_masked(height, width), step: 0 }
    }
}

/// Everything measured from one forward pass before committing.
#[derive(Clone, Debug)]
pub struct StepInputs {
    pub guided: LogitsGrid,
    /// Masked positions in ascending order.
    pub masked: Vec<usize>,
    /// Token entropy at each masked position.
    pub entropies: Vec<f64>,
    pub sample_entropy: f64,
}

/// Per-step record of one sample's decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub mask_before: Vec<bool>,
    /// `(position, token)` pairs committed this step, in commit order.
    pub committed: Vec<(usize, Token)>,
    /// Entropy at each position masked before the step, ascending position order.
    pub entropies: Vec<f64>,
    pub sample_entropy: f64,
    pub branch: Branch,
    /// Sampling temperature at each position masked before the step.
    pub temperatures: Vec<f64>,
    /// Committed tokens plus argmax fills at still-masked positions.
    pub estimate: TokenGrid,
    pub embedding: Embedding,
}

/// Guided logits and entropy measurements for the current state.
pub fn prepare_step(params: &ModelParams, state: &DecodeState, cfg: &SamplerConfig) -> Result<StepInputs> {
    let cond = forward(params, &state.prompt, &state.grid, true)?;
    let guided = if cfg.cfg_scale != 0.0 {
        let uncond = forward(params, &state.prompt, &state.grid, false)?;
        guided_logits(&cond, &uncond, cfg.cfg_scale)
    } else {
        cond.clone()
    };
    if !guided.is_finite() {
        return Err(Error::NonFinite("guided logits".into()));
    }
    let source = if cfg.entropy_from_guided { &guided } else { &cond };
    let masked = state.grid.masked_positions();
    let entropies = masked.iter().map(|&p| token_entropy(&source.probs(p, 1.0))).collect::<Result<Vec<_>>>()?;
    let sample_entropy = sample_entropy(&entropies)?;
    Ok(StepInputs { guided, masked, entropies, sample_entropy })
}

fn draw(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `acc` just below 1: fall back to the last non-zero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn argmax(row: &[f64]) -> usize {
    row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best })
}

/// Fill still-masked positions of `grid` with the argmax of `logits`.
pub fn intermediate_estimate(grid: &TokenGrid, logits: &LogitsGrid) -> TokenGrid {
    let mut est = grid.clone();
    for p in grid.masked_positions() {
        est.tokens[p] = argmax(logits.row(p)) as Token;
        est.mask[p] = false;
    }
    est
}

/// Draw a token at every masked position, then commit the `n_commit`
/// most confident ones (ties to the lower position index).
pub fn commit_step(
    state: &mut DecodeState,
    inputs: &StepInputs,
    branch: Branch,
    n_commit: usize,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<StepRecord> {
    let n_colors = inputs.guided.n_colors;
    let mask_before = state.grid.mask.clone();
    let mut temperatures = Vec::with_capacity(inputs.masked.len());
    let mut draws = Vec::with_capacity(inputs.masked.len());
    for (k, &p) in inputs.masked.iter().enumerate() {
        let temp = match branch {
            Branch::Explore => dynamic_temperature(inputs.entropies[k], &cfg.routing),
            Branch::Exploit | Branch::Standard => cfg.temperature,
        };
        let row = inputs.guided.row(p);
        let token = draw(&softmax(row, temp), rng);
        let mut key = softmax(row, 1.0)[token].ln();
        if cfg.gumbel_noise > 0.0 {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            key += cfg.gumbel_noise * -(-u.ln()).ln();
        }
        temperatures.push(temp);
        draws.push((p, token as Token, key));
    }
    debug_assert!(draws.iter().all(|d| (d.1 as usize) < n_colors));
    if n_commit == 0 || n_commit > draws.len() {
        return Err(Error::Config(format!("cannot commit {n_commit} of {} masked positions", draws.len())));
    }
    let mut order: Vec<usize> = (0..draws.len()).collect();
    order.sort_by(|&a, &b| draws[b].2.total_cmp(&draws[a].2).then(draws[a].0.cmp(&draws[b].0)));
    let committed: Vec<(usize, Token)> = order[..n_commit].iter().map(|&k| (draws[k].0, draws[k].1)).collect();
    for &(p, t) in &committed {
        state.grid.tokens[p] = t;
        state.grid.mask[p] = false;
    }
    state.step += 1;
    let estimate = intermediate_estimate(&state.grid, &inputs.guided);
    let embedding = embed(&estimate, n_colors)?;
    Ok(StepRecord {
        step: state.step,
        mask_before,
        committed,
        entropies: inputs.entropies.clone(),
        sample_entropy: inputs.sample_entropy,
        branch,
        temperatures,
        estimate,
        embedding,
    })
}

/// One decoding step of a single sample: forward pass, draw, commit.
pub fn sample_step(
    params: &ModelParams,
    state: &mut DecodeState,
    branch: Branch,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<StepRecord> {
    let n = state.grid.len();
    let schedule = mask_schedule(n, cfg.steps);
    let t = state.step + 1;
    if t > cfg.steps {
        return Err(Error::Config("decoding already finished".into()));
    }
    let n_commit = schedule[t - 1] - schedule[t];
    let inputs = prepare_step(params, state, cfg)?;
    commit_step(state, &inputs, branch, n_commit, cfg, rng)
}
