use super::graph::{Graph, Var};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::world::TokenGrid;

/// Per-position logits over the codebook for every image position.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitsGrid {
    pub n_positions: usize,
    pub n_colors: usize,
    /// Row-major `n_positions x n_colors`.
    pub values: Vec<f64>,
    pub cfg_applied: bool,
    pub temperature_applied: f64,
}

impl LogitsGrid {
    pub fn row(&self, pos: usize) -> &[f64] {
        &self.values[pos * self.n_colors..(pos + 1) * self.n_colors]
    }

    /// Softmax of one position at the given temperature.
    pub fn probs(&self, pos: usize, temperature: f64) -> Vec<f64> {
        softmax(self.row(pos), temperature)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable softmax of `logits / temperature`.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

fn check_inputs(params: &ModelParams, prompt: &[usize], grid: &TokenGrid) -> Result<()> {
    let arch = params.arch();
    if grid.len() != arch.n_tokens() || grid.height != arch.grid_height || grid.width != arch.grid_width {
        return Err(Error::ShapeMismatch(format!(
            "grid {}x{} but model expects {}x{}",
            grid.height, grid.width, arch.grid_height, arch.grid_width
        )));
    }
    if prompt.len() != arch.prompt_len {
        return Err(Error::ShapeMismatch(format!("prompt of {} tokens, expected {}", prompt.len(), arch.prompt_len)));
    }
    if let Some(t) = prompt.iter().find(|&&t| t >= arch.prompt_vocab) {
        return Err(Error::ShapeMismatch(format!("prompt token {t} outside vocabulary {}", arch.prompt_vocab)));
    }
    grid.validate(arch.n_colors)
}

/// Builds the transformer on `g` and returns the `N x |V|` logits node.
///
/// Masked grid positions read the MASK embedding; with `conditional = false`
/// every prompt slot reads the learned null-prompt embedding instead.
pub fn forward_graph(g: &mut Graph, prompt: &[usize], grid: &TokenGrid, conditional: bool) -> Result<Var> {
    let params = g.params();
    check_inputs(params, prompt, grid)?;
    let arch = params.arch();
    let h = &params.handles;

    let prompt_part = if conditional {
        let table = g.param(h.prompt_embed);
        g.gather(table, prompt.to_vec())
    } else {
        let null = g.param(h.null_prompt);
        g.gather(null, vec![0; arch.prompt_len])
    };
    let image_rows: Vec<usize> =
        grid.tokens.iter().zip(&grid.mask).map(|(&t, &m)| if m { arch.mask_token() } else { t as usize }).collect();
    let table = g.param(h.token_embed);
    let image_part = g.gather(table, image_rows);
    let tokens = g.concat_rows(prompt_part, image_part);
    let pos = g.param(h.pos_embed);
    let mut x = g.add(tokens, pos);

    for b in &h.blocks {
        let n1 = g.layer_norm(x, b.ln1_g, b.ln1_b);
        let qkv = g.linear(n1, b.w_qkv, b.b_qkv);
        let att = g.attention(qkv, arch.heads);
        let proj = g.linear(att, b.w_o, b.b_o);
        x = g.add(x, proj);
        let n2 = g.layer_norm(x, b.ln2_g, b.ln2_b);
        let f1 = g.linear(n2, b.w_ff1, b.b_ff1);
        let act = g.gelu(f1);
        let f2 = g.linear(act, b.w_ff2, b.b_ff2);
        x = g.add(x, f2);
    }
    let img = g.slice_rows(x, arch.prompt_len, arch.n_tokens());
    let nf = g.layer_norm(img, h.lnf_g, h.lnf_b);
    Ok(g.linear(nf, h.w_out, h.b_out))
}

/// Logits for every image position in one pass.
pub fn forward(params: &ModelParams, prompt: &[usize], grid: &TokenGrid, conditional: bool) -> Result<LogitsGrid> {
    let mut g = Graph::new(params);
    let out = forward_graph(&mut g, prompt, grid, conditional)?;
    let values = g.value(out).to_vec();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward logits".into()));
    }
    let arch = params.arch();
    Ok(LogitsGrid {
        n_positions: arch.n_tokens(),
        n_colors: arch.n_colors,
        values,
        cfg_applied: false,
        temperature_applied: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{Architecture, ModelConfig};
    use crate::world::{PromptSpec, WorldConfig};

    fn setup() -> (WorldConfig, ModelParams, Vec<usize>) {
        let world = WorldConfig::default();
        let model = ModelConfig { d_model: 16, heads: 2, layers: 2, d_ff: 32, init_std: 0.3 };
        let params = ModelParams::init(Architecture::new(&world, &model).unwrap(), 0.3, 9);
        let prompt = world.encode_prompt(&PromptSpec::Counting { color: 3, n: 2 }).unwrap();
        (world, params, prompt)
    }

    #[test]
    fn deterministic_and_normalized() {
        let (_, params, prompt) = setup();
        let grid = TokenGrid::fully_masked(8, 8);
        let a = forward(&params, &prompt, &grid, true).unwrap();
        let b = forward(&params, &prompt, &grid, true).unwrap();
        assert_eq!(a.values, b.values);
        for pos in 0..64 {
            let s: f64 = a.probs(pos, 1.0).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn positions_and_prompt_matter() {
        let (_, params, prompt) = setup();
        let mut grid = TokenGrid::filled(8, 8, 0);
        grid.set(0, 0, 1);
        let a = forward(&params, &prompt, &grid, true).unwrap();
        let mut swapped = TokenGrid::filled(8, 8, 0);
        swapped.set(0, 1, 1);
        let b = forward(&params, &prompt, &swapped, true).unwrap();
        assert_ne!(a.values, b.values);
        let u = forward(&params, &prompt, &grid, false).unwrap();
        assert_ne!(a.values, u.values);
    }

    #[test]
    fn wrong_grid_size_is_shape_mismatch() {
        let (_, params, prompt) = setup();
        let grid = TokenGrid::fully_masked(4, 4);
        assert!(matches!(forward(&params, &prompt, &grid, true), Err(Error::ShapeMismatch(_))));
    }
}
