use serde::{Deserialize, Serialize};

use super::{PromptSpec, Token, TokenGrid};
use crate::error::Result;

/// Shaped rewards give partial credit; strict rewards are 0/1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    #[default]
    Shaped,
    Strict,
}

/// Inclusive bounding box of one connected component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }
}

/// Bounding boxes of the 4-connected components of `color`, in scan order of
/// their first cell.
pub fn component_boxes(grid: &TokenGrid, color: Token) -> Vec<BoundingBox> {
    let (h, w) = (grid.height, grid.width);
    let mut seen = vec![false; h * w];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if seen[start] || grid.mask[start] || grid.tokens[start] != color {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut bb = BoundingBox { top: start / w, left: start % w, bottom: start / w, right: start % w };
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            bb.top = bb.top.min(r);
            bb.bottom = bb.bottom.max(r);
            bb.left = bb.left.min(c);
            bb.right = bb.right.max(c);
            let mut visit = |j: usize| {
                if !seen[j] && !grid.mask[j] && grid.tokens[j] == color {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        boxes.push(bb);
    }
    boxes
}

/// Number of 4-connected components whose token equals `color`.
pub fn count_components(grid: &TokenGrid, color: Token) -> usize {
    component_boxes(grid, color).len()
}

/// Centroid (row, col) in cell-center units, or `None` if `color` is absent.
pub(crate) fn centroid(grid: &TokenGrid, color: Token) -> Option<(f64, f64)> {
    let (mut n, mut sr, mut sc) = (0usize, 0.0, 0.0);
    for (i, &t) in grid.tokens.iter().enumerate() {
        if t == color && !grid.mask[i] {
            n += 1;
            sr += (i / grid.width) as f64 + 0.5;
            sc += (i % grid.width) as f64 + 0.5;
        }
    }
    (n > 0).then(|| (sr / n as f64, sc / n as f64))
}

/// Programmatic reward in `[0, 1]`; 1.0 iff the prompt is exactly satisfied.
pub fn reward(grid: &TokenGrid, spec: &PromptSpec, mode: RewardMode) -> Result<f64> {
    grid.require_unmasked()?;
    let strict = mode == RewardMode::Strict;
    let binary = |ok: bool| if ok { 1.0 } else { 0.0 };
    let r = match *spec {
        PromptSpec::SingleObject { color } => match count_components(grid, color) {
            1 => 1.0,
            0 => 0.0,
            _ if strict => 0.0,
            _ => 0.5,
        },
        PromptSpec::TwoObject { first, second } => {
            let present = [first, second].iter().filter(|&&c| count_components(grid, c) >= 1).count();
            if strict {
                binary(present == 2)
            } else {
                0.5 * present as f64
            }
        }
        PromptSpec::Counting { color, n } => {
            let count = count_components(grid, color) as f64;
            let n = n as f64;
            if strict {
                binary(count == n)
            } else {
                (1.0 - (count - n).abs() / n).max(0.0)
            }
        }
        PromptSpec::ColorAttr { tall, wide } => {
            let tall_ok = component_boxes(grid, tall).iter().any(|b| b.height() > b.width());
            let wide_ok = component_boxes(grid, wide).iter().any(|b| b.width() > b.height());
            let frac = (tall_ok as u8 + wide_ok as u8) as f64 / 2.0;
            if strict {
                binary(frac == 1.0)
            } else {
                frac
            }
        }
        PromptSpec::Position { color, quadrant } => {
            let inside = centroid(grid, color).is_some_and(|(r, c)| {
                let (mid_r, mid_c) = (grid.height as f64 / 2.0, grid.width as f64 / 2.0);
                let row_ok = if quadrant.is_north() { r < mid_r } else { r > mid_r };
                let col_ok = if quadrant.is_west() { c < mid_c } else { c > mid_c };
                row_ok && col_ok
            });
            binary(inside)
        }
    };
    Ok(r)
}
