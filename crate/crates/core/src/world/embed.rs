use super::TokenGrid;
use crate::error::Result;

/// Unit-norm image descriptor: per-color histogram followed by per-color
/// centroid `(row, col)` pairs normalized to `[0, 1]` (zeros for absent colors).
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(n_colors: usize) -> usize {
        3 * n_colors
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Raw (pre-normalization) descriptor.
pub(crate) fn raw_features(grid: &TokenGrid, n_colors: usize) -> Vec<f64> {
    let n = grid.len() as f64;
    let mut counts = vec![0usize; n_colors];
    let mut rows = vec![0.0; n_colors];
    let mut cols = vec![0.0; n_colors];
    for (i, &t) in grid.tokens.iter().enumerate() {
        let t = t as usize;
        counts[t] += 1;
        rows[t] += (i / grid.width) as f64 + 0.5;
        cols[t] += (i % grid.width) as f64 + 0.5;
    }
    let mut v = Vec::with_capacity(Embedding::dim(n_colors));
    v.extend(counts.iter().map(|&c| c as f64 / n));
    for c in 0..n_colors {
        if counts[c] == 0 {
            v.extend([0.0, 0.0]);
        } else {
            let k = counts[c] as f64;
            v.push(rows[c] / k / grid.height as f64);
            v.push(cols[c] / k / grid.width as f64);
        }
    }
    v
}

/// Deterministic embedding of a fully unmasked grid.
pub fn embed(grid: &TokenGrid, n_colors: usize) -> Result<Embedding> {
    grid.require_unmasked()?;
    grid.validate(n_colors)?;
    let mut v = raw_features(grid, n_colors);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(Embedding(v))
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
