use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u8;

/// A rectangular grid of codebook tokens plus a mask (`true` = MASK placeholder).
///
/// Token values at masked positions are ignored; they are stored as 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenGrid {
    pub height: usize,
    pub width: usize,
    pub tokens: Vec<Token>,
    pub mask: Vec<bool>,
}

impl TokenGrid {
    pub fn filled(height: usize, width: usize, token: Token) -> Self {
        TokenGrid { height, width, tokens: vec![token; height * width], mask: vec![false; height * width] }
    }

    pub fn from_tokens(height: usize, width: usize, tokens: Vec<Token>) -> Result<Self> {
        if tokens.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens for a {height}x{width} grid",
                tokens.len()
            )));
        }
        let n = tokens.len();
        Ok(TokenGrid { height, width, tokens, mask: vec![false; n] })
    }

    pub fn fully_masked(height: usize, width: usize) -> Self {
        TokenGrid { height, width, tokens: vec![0; height * width], mask: vec![true; height * width] }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_masked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_unmasked(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn masked_positions(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }

    pub fn get(&self, row: usize, col: usize) -> Token {
        self.tokens[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, token: Token) {
        let i = row * self.width + col;
        self.tokens[i] = token;
        self.mask[i] = false;
    }

    /// Re-mask the given positions of a copy of this grid.
    pub fn with_mask(&self, mask: &[bool]) -> Result<TokenGrid> {
        if mask.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("mask of {} for grid of {}", mask.len(), self.len())));
        }
        let mut g = self.clone();
        for (i, &m) in mask.iter().enumerate() {
            g.mask[i] = m;
            if m {
                g.tokens[i] = 0;
            }
        }
        Ok(g)
    }

    /// Check the grid invariants against a codebook size.
    pub fn validate(&self, n_colors: usize) -> Result<()> {
        if self.tokens.len() != self.height * self.width || self.mask.len() != self.tokens.len() {
            return Err(Error::ShapeMismatch("grid buffers do not match dimensions".into()));
        }
        if let Some(t) = self.tokens.iter().zip(&self.mask).find(|(&t, &m)| !m && t as usize >= n_colors) {
            return Err(Error::ShapeMismatch(format!("token {} outside codebook of {n_colors}", t.0)));
        }
        Ok(())
    }

    pub(crate) fn require_unmasked(&self) -> Result<()> {
        if self.is_fully_unmasked() {
            Ok(())
        } else {
            Err(Error::MaskedInput)
        }
    }
}
