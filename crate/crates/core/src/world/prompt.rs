use serde::{Deserialize, Serialize};

use super::{Token, WorldConfig};
use crate::error::{Error, Result};

pub(crate) const MIN_PROMPT_LEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    SingleObject,
    TwoObject,
    Counting,
    ColorAttr,
    Position,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::SingleObject, Task::TwoObject, Task::Counting, Task::ColorAttr, Task::Position];

    pub fn name(self) -> &'static str {
        match self {
            Task::SingleObject => "SingleObject",
            Task::TwoObject => "TwoObject",
            Task::Counting => "Counting",
            Task::ColorAttr => "ColorAttr",
            Task::Position => "Position",
        }
    }

    pub fn index(self) -> usize {
        Task::ALL.iter().position(|&t| t == self).unwrap()
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "singleobject" | "single" => Ok(Task::SingleObject),
            "twoobject" | "two" => Ok(Task::TwoObject),
            "counting" => Ok(Task::Counting),
            "colorattr" => Ok(Task::ColorAttr),
            "position" => Ok(Task::Position),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    NW,
    NE,
    SW,
    SE,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::NW, Quadrant::NE, Quadrant::SW, Quadrant::SE];

    pub fn is_north(self) -> bool {
        matches!(self, Quadrant::NW | Quadrant::NE)
    }

    pub fn is_west(self) -> bool {
        matches!(self, Quadrant::NW | Quadrant::SW)
    }

    fn index(self) -> usize {
        Quadrant::ALL.iter().position(|&q| q == self).unwrap()
    }
}

/// A structured prompt: one task plus its parameters.
///
/// Serialized as `{"task": "...", "params": {...}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "task", content = "params")]
pub enum PromptSpec {
    SingleObject { color: Token },
    TwoObject { first: Token, second: Token },
    Counting { color: Token, n: u32 },
    /// One tall (height > width) object of color `tall` and one wide
    /// (width > height) object of color `wide`.
    ColorAttr { tall: Token, wide: Token },
    Position { color: Token, quadrant: Quadrant },
}

impl PromptSpec {
    pub fn task(&self) -> Task {
        match self {
            PromptSpec::SingleObject { .. } => Task::SingleObject,
            PromptSpec::TwoObject { .. } => Task::TwoObject,
            PromptSpec::Counting { .. } => Task::Counting,
            PromptSpec::ColorAttr { .. } => Task::ColorAttr,
            PromptSpec::Position { .. } => Task::Position,
        }
    }
}

/// Scene record as exchanged in JSON: `{task, params, seed}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRecord {
    #[serde(flatten)]
    pub spec: PromptSpec,
    pub seed: u64,
}

/// Prompt vocabulary layout:
/// `PAD | tasks | colors | counts 1..=max | quadrants | TALL WIDE`.
pub(crate) struct Vocab {
    n_colors: usize,
    max_count: usize,
    len: usize,
}

const PAD: usize = 0;
const TASK0: usize = 1;

impl Vocab {
    pub(crate) fn new(world: &WorldConfig) -> Self {
        Vocab { n_colors: world.n_colors, max_count: world.max_objects(), len: world.prompt_len }
    }

    fn color0(&self) -> usize {
        TASK0 + Task::ALL.len()
    }

    fn count0(&self) -> usize {
        self.color0() + self.n_colors
    }

    fn quad0(&self) -> usize {
        self.count0() + self.max_count
    }

    fn tall(&self) -> usize {
        self.quad0() + 4
    }

    fn wide(&self) -> usize {
        self.tall() + 1
    }

    pub(crate) fn size(&self) -> usize {
        self.wide() + 1
    }

    fn color(&self, c: Token) -> usize {
        self.color0() + c as usize
    }

    pub(crate) fn encode(&self, spec: &PromptSpec) -> Result<Vec<usize>> {
        let task = TASK0 + spec.task().index();
        let body = match *spec {
            PromptSpec::SingleObject { color } => vec![task, self.color(color)],
            PromptSpec::TwoObject { first, second } => vec![task, self.color(first), self.color(second)],
            PromptSpec::Counting { color, n } => vec![task, self.count0() + n as usize - 1, self.color(color)],
            PromptSpec::ColorAttr { tall, wide } => {
                vec![task, self.tall(), self.color(tall), self.wide(), self.color(wide)]
            }
            PromptSpec::Position { color, quadrant } => vec![task, self.color(color), self.quad0() + quadrant.index()],
        };
        let mut out = body;
        out.resize(self.len, PAD);
        Ok(out)
    }

    pub(crate) fn decode(&self, tokens: &[usize]) -> Result<PromptSpec> {
        let bad = |why: &str| Error::MalformedInput(format!("prompt {tokens:?}: {why}"));
        if tokens.len() != self.len {
            return Err(bad("wrong length"));
        }
        let color = |t: usize| -> Result<Token> {
            if (self.color0()..self.count0()).contains(&t) {
                Ok((t - self.color0()) as Token)
            } else {
                Err(bad("expected a color token"))
            }
        };
        let task_idx = tokens[0].checked_sub(TASK0).filter(|&i| i < Task::ALL.len()).ok_or_else(|| bad("no task"))?;
        let (spec, used) = match Task::ALL[task_idx] {
            Task::SingleObject => (PromptSpec::SingleObject { color: color(tokens[1])? }, 2),
            Task::TwoObject => (PromptSpec::TwoObject { first: color(tokens[1])?, second: color(tokens[2])? }, 3),
            Task::Counting => {
                if !(self.count0()..self.quad0()).contains(&tokens[1]) {
                    return Err(bad("expected a count token"));
                }
                let n = (tokens[1] - self.count0() + 1) as u32;
                (PromptSpec::Counting { color: color(tokens[2])?, n }, 3)
            }
            Task::ColorAttr => {
                if tokens[1] != self.tall() || tokens[3] != self.wide() {
                    return Err(bad("expected role tokens"));
                }
                (PromptSpec::ColorAttr { tall: color(tokens[2])?, wide: color(tokens[4])? }, 5)
            }
            Task::Position => {
                let q = tokens[2].checked_sub(self.quad0()).filter(|&q| q < 4).ok_or_else(|| bad("no quadrant"))?;
                (PromptSpec::Position { color: color(tokens[1])?, quadrant: Quadrant::ALL[q] }, 3)
            }
        };
        if tokens[used..].iter().any(|&t| t != PAD) {
            return Err(bad("trailing tokens"));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn encoding_is_injective_and_round_trips() {
        let world = WorldConfig::default();
        let specs = world.all_specs();
        let mut seen = HashSet::new();
        for spec in &specs {
            let toks = world.encode_prompt(spec).unwrap();
            assert_eq!(toks.len(), world.prompt_len);
            assert!(toks.iter().all(|&t| t < world.prompt_vocab_size()));
            assert!(seen.insert(toks.clone()), "collision for {spec:?}");
            assert_eq!(world.decode_prompt(&toks).unwrap(), *spec);
        }
    }

    #[test]
    fn decode_rejects_garbage() {
        let world = WorldConfig::default();
        assert!(world.decode_prompt(&[0; 6]).is_err());
        assert!(world.decode_prompt(&[1, 2]).is_err());
    }

    #[test]
    fn scene_record_json_shape() {
        let rec = SceneRecord { spec: PromptSpec::Counting { color: 3, n: 2 }, seed: 7 };
        let s = serde_json::to_string(&rec).unwrap();
        assert_eq!(s, r#"{"task":"Counting","params":{"color":3,"n":2},"seed":7}"#);
        let back: SceneRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rec);
    }
}
