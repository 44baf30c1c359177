//! Procedural grid-image domain: structured prompts, scene generation,
//! handcrafted embeddings and programmatic rewards.
//!
//! Token index equals color index. Color 0 is the background; objects are
//! axis-aligned rectangles of colors `1..n_colors`.

mod embed;
mod grid;
mod ppm;
mod prompt;
mod reward;
mod scene;

use serde::{Deserialize, Serialize};

pub use embed::{cosine_similarity, embed, Embedding};
pub use grid::{Token, TokenGrid};
pub use ppm::{palette_color, write_ppm};
pub use prompt::{PromptSpec, Quadrant, SceneRecord, Task};
pub use reward::{component_boxes, count_components, reward, BoundingBox, RewardMode};
pub use scene::generate_scene;

use crate::error::{Error, Result};

/// Background color shared by every scene.
pub const BACKGROUND: Token = 0;

/// Shape of the synthetic world.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub height: usize,
    pub width: usize,
    /// Codebook size |V|.
    pub n_colors: usize,
    /// Prompt length P.
    pub prompt_len: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig { height: 8, width: 8, n_colors: 8, prompt_len: 6 }
    }
}

impl WorldConfig {
    /// Number of image tokens N.
    pub fn n_tokens(&self) -> usize {
        self.height * self.width
    }

    /// Largest number of pairwise non-touching objects the grid can hold:
    /// single cells on one checkerboard parity.
    pub fn max_objects(&self) -> usize {
        self.n_tokens().div_ceil(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::Config(format!("grid {}x{} must be at least 2x2", self.height, self.width)));
        }
        if !(3..=255).contains(&self.n_colors) {
            return Err(Error::Config(format!("n_colors {} must be in 3..=255", self.n_colors)));
        }
        if self.prompt_len < prompt::MIN_PROMPT_LEN {
            return Err(Error::Config(format!(
                "prompt_len {} must be at least {}",
                self.prompt_len,
                prompt::MIN_PROMPT_LEN
            )));
        }
        Ok(())
    }

    /// Size of the prompt-token vocabulary.
    pub fn prompt_vocab_size(&self) -> usize {
        prompt::Vocab::new(self).size()
    }

    pub fn encode_prompt(&self, spec: &PromptSpec) -> Result<Vec<usize>> {
        self.check_spec(spec)?;
        prompt::Vocab::new(self).encode(spec)
    }

    pub fn decode_prompt(&self, tokens: &[usize]) -> Result<PromptSpec> {
        prompt::Vocab::new(self).decode(tokens)
    }

    /// Validate a spec against this world; object counts beyond
    /// [`WorldConfig::max_objects`] are reported as unsatisfiable.
    pub fn check_spec(&self, spec: &PromptSpec) -> Result<()> {
        let colors = self.n_colors as u32;
        let color_ok = |c: Token| (1..colors).contains(&(c as u32));
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match *spec {
            PromptSpec::SingleObject { color } | PromptSpec::Position { color, .. } => {
                if !color_ok(color) {
                    return bad(format!("color {color} not in 1..{colors}"));
                }
            }
            PromptSpec::TwoObject { first: a, second: b } | PromptSpec::ColorAttr { tall: a, wide: b } => {
                if !color_ok(a) || !color_ok(b) {
                    return bad(format!("colors ({a}, {b}) not in 1..{colors}"));
                }
                if a == b {
                    return bad(format!("colors must differ, got {a} twice"));
                }
            }
            PromptSpec::Counting { color, n } => {
                if !color_ok(color) {
                    return bad(format!("color {color} not in 1..{colors}"));
                }
                if n == 0 {
                    return bad("count must be >= 1".into());
                }
                if n as usize > self.max_objects() {
                    return Err(Error::UnsatisfiableSpec(format!(
                        "{n} objects cannot fit a {}x{} grid (max {})",
                        self.height,
                        self.width,
                        self.max_objects()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every supported spec of one task.
    pub fn specs_for_task(&self, task: Task) -> Vec<PromptSpec> {
        self.specs_for_task_capped(task, self.max_objects() as u32)
    }

    /// Like [`WorldConfig::specs_for_task`] but counting only up to `max_count`.
    pub fn specs_for_task_capped(&self, task: Task, max_count: u32) -> Vec<PromptSpec> {
        let colors: Vec<Token> = (1..self.n_colors as Token).collect();
        let mut out = Vec::new();
        match task {
            Task::SingleObject => out.extend(colors.iter().map(|&color| PromptSpec::SingleObject { color })),
            Task::TwoObject | Task::ColorAttr => {
                for &a in &colors {
                    for &b in &colors {
                        if a != b {
                            out.push(match task {
                                Task::TwoObject => PromptSpec::TwoObject { first: a, second: b },
                                _ => PromptSpec::ColorAttr { tall: a, wide: b },
                            });
                        }
                    }
                }
            }
            Task::Counting => {
                let max = max_count.min(self.max_objects() as u32);
                for &color in &colors {
                    for n in 1..=max {
                        out.push(PromptSpec::Counting { color, n });
                    }
                }
            }
            Task::Position => {
                for &color in &colors {
                    for quadrant in Quadrant::ALL {
                        out.push(PromptSpec::Position { color, quadrant });
                    }
                }
            }
        }
        out
    }

    /// The full supported parameter grid across all tasks.
    pub fn all_specs(&self) -> Vec<PromptSpec> {
        Task::ALL.iter().flat_map(|&t| self.specs_for_task(t)).collect()
    }
}
