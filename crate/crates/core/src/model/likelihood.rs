use super::graph::{Graph, Var};
use super::guidance::guided_graph;
use super::params::ModelParams;
use super::transformer::forward_graph;
use crate::error::{Error, Result};
use crate::world::TokenGrid;

/// A completed sample re-masked at `mask`; the original tokens under the
/// mask are the prediction targets.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedCompletion {
    pub prompt: Vec<usize>,
    /// Fully defined grid (its own mask is ignored).
    pub tokens: TokenGrid,
    pub mask: Vec<bool>,
}

impl MaskedCompletion {
    pub fn new(prompt: Vec<usize>, tokens: TokenGrid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != tokens.len() {
            return Err(Error::ShapeMismatch(format!("mask of {} for grid of {}", mask.len(), tokens.len())));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyMask);
        }
        Ok(MaskedCompletion { prompt, tokens, mask })
    }

    pub fn masked_positions(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }

    /// Model input: visible tokens with the MASK placeholder at masked positions.
    pub fn input(&self) -> Result<TokenGrid> {
        let mut g = self.tokens.clone();
        g.mask.iter_mut().for_each(|m| *m = false);
        g.with_mask(&self.mask)
    }
}

/// How policy log-probabilities are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyEval {
    pub cfg_scale: f64,
    pub temperature: f64,
}

impl Default for PolicyEval {
    fn default() -> Self {
        PolicyEval { cfg_scale: 0.0, temperature: 1.0 }
    }
}

/// Guided, temperature-scaled log-softmax over all positions (`N x |V|`).
pub fn policy_log_probs_graph(
    g: &mut Graph,
    prompt: &[usize],
    input: &TokenGrid,
    eval: PolicyEval,
) -> Result<Var> {
    let cond = forward_graph(g, prompt, input, true)?;
    let logits = if eval.cfg_scale != 0.0 {
        let uncond = forward_graph(g, prompt, input, false)?;
        guided_graph(g, cond, uncond, eval.cfg_scale)
    } else {
        cond
    };
    let scaled = if eval.temperature != 1.0 { g.scale(logits, 1.0 / eval.temperature) } else { logits };
    Ok(g.log_softmax(scaled))
}

/// Per-token log-probabilities of the targets (an `|M| x 1` node, in
/// ascending position order).
pub fn masked_log_likelihood_graph(g: &mut Graph, completion: &MaskedCompletion, eval: PolicyEval) -> Result<Var> {
    let positions = completion.masked_positions();
    if positions.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n_colors = g.params().arch().n_colors;
    let input = completion.input()?;
    let lsm = policy_log_probs_graph(g, &completion.prompt, &input, eval)?;
    let mut at = Vec::with_capacity(positions.len());
    for &p in &positions {
        let t = completion.tokens.tokens[p] as usize;
        if t >= n_colors {
            return Err(Error::ShapeMismatch(format!("target token {t} outside codebook {n_colors}")));
        }
        at.push((p, t));
    }
    Ok(g.pick(lsm, at))
}

/// `log p(z_M | z_V) = sum_i log p(z_i | z_V)` with the per-position terms.
pub fn masked_log_likelihood(
    params: &ModelParams,
    completion: &MaskedCompletion,
    eval: PolicyEval,
) -> Result<(f64, Vec<f64>)> {
    let mut g = Graph::new(params);
    let lp = masked_log_likelihood_graph(&mut g, completion, eval)?;
    let per_token = g.value(lp).to_vec();
    if per_token.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("masked log-likelihood".into()));
    }
    Ok((per_token.iter().sum(), per_token))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{Architecture, ModelConfig};
    use crate::model::transformer::forward;
    use crate::model::guided_logits;
    use crate::world::{PromptSpec, WorldConfig};

    fn setup() -> (ModelParams, MaskedCompletion) {
        let world = WorldConfig { height: 3, width: 3, n_colors: 4, prompt_len: 5 };
        let model = ModelConfig { d_model: 8, heads: 2, layers: 1, d_ff: 16, init_std: 0.5 };
        let params = ModelParams::init(Architecture::new(&world, &model).unwrap(), 0.5, 4);
        let prompt = world.encode_prompt(&PromptSpec::SingleObject { color: 2 }).unwrap();
        let grid = TokenGrid::from_tokens(3, 3, vec![0, 1, 2, 3, 0, 1, 2, 3, 0]).unwrap();
        let mask = vec![true, false, true, false, false, true, false, false, true];
        (params, MaskedCompletion::new(prompt, grid, mask).unwrap())
    }

    #[test]
    fn factorizes_over_positions() {
        let (params, c) = setup();
        for cfg_scale in [0.0, 2.0] {
            let eval = PolicyEval { cfg_scale, temperature: 1.0 };
            let (total, per) = masked_log_likelihood(&params, &c, eval).unwrap();
            assert_eq!(per.len(), 4);
            assert!(total <= 0.0);
            assert!((total - per.iter().sum::<f64>()).abs() < 1e-12);
            // Oracle: one forward on the same visible context, sliced per position.
            let input = c.input().unwrap();
            let cond = forward(&params, &c.prompt, &input, true).unwrap();
            let uncond = forward(&params, &c.prompt, &input, false).unwrap();
            let guided = guided_logits(&cond, &uncond, cfg_scale);
            let oracle: f64 = c
                .masked_positions()
                .iter()
                .map(|&p| guided.probs(p, 1.0)[c.tokens.tokens[p] as usize].ln())
                .sum();
            assert!((total - oracle).abs() < 1e-9, "{total} vs {oracle}");
        }
    }

    #[test]
    fn empty_mask_rejected() {
        let (_, c) = setup();
        assert!(matches!(MaskedCompletion::new(c.prompt.clone(), c.tokens.clone(), vec![false; 9]), Err(Error::EmptyMask)));
    }
}
