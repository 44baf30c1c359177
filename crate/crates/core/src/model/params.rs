use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::world::WorldConfig;

/// Transformer hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d_model: 64, heads: 4, layers: 2, d_ff: 128, init_std: 0.02 }
    }
}

/// Every size needed to lay out and run a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub n_colors: usize,
    pub grid_height: usize,
    pub grid_width: usize,
    pub prompt_len: usize,
    pub prompt_vocab: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
}

impl Architecture {
    pub fn new(world: &WorldConfig, model: &ModelConfig) -> Result<Self> {
        world.validate()?;
        if model.d_model == 0 || model.heads == 0 || model.d_model % model.heads != 0 {
            return Err(Error::Config(format!("d_model {} must be a positive multiple of heads {}", model.d_model, model.heads)));
        }
        if model.layers == 0 || model.d_ff == 0 {
            return Err(Error::Config("layers and d_ff must be positive".into()));
        }
        Ok(Architecture {
            n_colors: world.n_colors,
            grid_height: world.height,
            grid_width: world.width,
            prompt_len: world.prompt_len,
            prompt_vocab: world.prompt_vocab_size(),
            d_model: model.d_model,
            heads: model.heads,
            layers: model.layers,
            d_ff: model.d_ff,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.grid_height * self.grid_width
    }

    pub fn seq_len(&self) -> usize {
        self.prompt_len + self.n_tokens()
    }

    /// Row index of the MASK placeholder in the token embedding table.
    pub fn mask_token(&self) -> usize {
        self.n_colors
    }
}

/// Index of one parameter tensor in the layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockIds {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub w_qkv: ParamId,
    pub b_qkv: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub w_ff1: ParamId,
    pub b_ff1: ParamId,
    pub w_ff2: ParamId,
    pub b_ff2: ParamId,
}

/// Named handles into the flat parameter buffer.
#[derive(Clone, Debug)]
pub(crate) struct Handles {
    pub token_embed: ParamId,
    pub prompt_embed: ParamId,
    pub null_prompt: ParamId,
    pub pos_embed: ParamId,
    pub blocks: Vec<BlockIds>,
    pub lnf_g: ParamId,
    pub lnf_b: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

#[derive(Clone, Copy, PartialEq)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

fn build_layout(arch: &Architecture) -> (Vec<ParamSpec>, Vec<Init>, Handles) {
    let mut specs = Vec::new();
    let mut inits = Vec::new();
    let mut offset = 0;
    let mut add = |name: String, rows: usize, cols: usize, init: Init| {
        specs.push(ParamSpec { name, rows, cols, offset });
        inits.push(init);
        offset += rows * cols;
        ParamId(specs.len() - 1)
    };
    let d = arch.d_model;
    let token_embed = add("token_embed".into(), arch.n_colors + 1, d, Init::Normal);
    let prompt_embed = add("prompt_embed".into(), arch.prompt_vocab, d, Init::Normal);
    let null_prompt = add("null_prompt".into(), 1, d, Init::Normal);
    let pos_embed = add("pos_embed".into(), arch.seq_len(), d, Init::Normal);
    let blocks = (0..arch.layers)
        .map(|l| {
            let mut p = |n: &str, r, c, i| add(format!("block{l}.{n}"), r, c, i);
            BlockIds {
                ln1_g: p("ln1_g", 1, d, Init::Ones),
                ln1_b: p("ln1_b", 1, d, Init::Zeros),
                w_qkv: p("w_qkv", d, 3 * d, Init::Normal),
                b_qkv: p("b_qkv", 1, 3 * d, Init::Zeros),
                w_o: p("w_o", d, d, Init::Normal),
                b_o: p("b_o", 1, d, Init::Zeros),
                ln2_g: p("ln2_g", 1, d, Init::Ones),
                ln2_b: p("ln2_b", 1, d, Init::Zeros),
                w_ff1: p("w_ff1", d, arch.d_ff, Init::Normal),
                b_ff1: p("b_ff1", 1, arch.d_ff, Init::Zeros),
                w_ff2: p("w_ff2", arch.d_ff, d, Init::Normal),
                b_ff2: p("b_ff2", 1, d, Init::Zeros),
            }
        })
        .collect();
    let lnf_g = add("lnf_g".into(), 1, d, Init::Ones);
    let lnf_b = add("lnf_b".into(), 1, d, Init::Zeros);
    let w_out = add("w_out".into(), d, arch.n_colors, Init::Normal);
    let b_out = add("b_out".into(), 1, arch.n_colors, Init::Zeros);
    let handles =
        Handles { token_embed, prompt_embed, null_prompt, pos_embed, blocks, lnf_g, lnf_b, w_out, b_out };
    (specs, inits, handles)
}

/// All learnable parameters of the token predictor, stored flat in layout order.
#[derive(Clone, Debug)]
pub struct ModelParams {
    arch: Architecture,
    specs: Vec<ParamSpec>,
    pub(crate) handles: Handles,
    data: Vec<f64>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.data == other.data
    }
}

impl ModelParams {
    /// Gaussian-initialized weights, unit layer-norm gains, zero biases.
    pub fn init(arch: Architecture, init_std: f64, seed: u64) -> Self {
        let (specs, inits, handles) = build_layout(&arch);
        let total = specs.last().map_or(0, |s| s.offset + s.len());
        let mut data = vec![0.0; total];
        let mut rng = rng::stream(seed, &[0x1417]);
        let normal = Normal::new(0.0, init_std).expect("init_std must be finite and non-negative");
        for (spec, init) in specs.iter().zip(&inits) {
            let slot = &mut data[spec.offset..spec.offset + spec.len()];
            match init {
                Init::Normal => slot.iter_mut().for_each(|x| *x = normal.sample(&mut rng)),
                Init::Zeros => {}
                Init::Ones => slot.fill(1.0),
            }
        }
        ModelParams { arch, specs, handles, data }
    }

    /// Wrap an existing flat buffer (e.g. from a checkpoint).
    pub fn from_flat(arch: Architecture, data: Vec<f64>) -> Result<Self> {
        let (specs, _, handles) = build_layout(&arch);
        let total = specs.last().map_or(0, |s| s.offset + s.len());
        if data.len() != total {
            return Err(Error::ShapeMismatch(format!("{} values for {} parameters", data.len(), total)));
        }
        Ok(ModelParams { arch, specs, handles, data })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn spec(&self, id: ParamId) -> &ParamSpec {
        &self.specs[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.data[s.offset..s.offset + s.len()]
    }

    /// Every tensor handle, in layout order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.specs.len()).map(ParamId)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
