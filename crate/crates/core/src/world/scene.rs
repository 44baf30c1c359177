use rand::seq::SliceRandom;
use rand::Rng;

use super::{PromptSpec, Quadrant, Token, TokenGrid, WorldConfig, BACKGROUND};
use crate::error::{Error, Result};
use crate::rng;

const SCENE_ATTEMPTS: usize = 40;
const RECT_ATTEMPTS: usize = 60;

/// Cells already used by an object or 4-adjacent to one.
struct Canvas {
    grid: TokenGrid,
    blocked: Vec<bool>,
}

struct Region {
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
}

impl Canvas {
    fn new(h: usize, w: usize) -> Self {
        Canvas { grid: TokenGrid::filled(h, w, BACKGROUND), blocked: vec![false; h * w] }
    }

    fn fits(&self, top: usize, left: usize, rh: usize, rw: usize) -> bool {
        (top..top + rh).all(|r| (left..left + rw).all(|c| !self.blocked[r * self.grid.width + c]))
    }

    fn paint(&mut self, top: usize, left: usize, rh: usize, rw: usize, color: Token) {
        let (h, w) = (self.grid.height, self.grid.width);
        for r in top..top + rh {
            for c in left..left + rw {
                self.grid.set(r, c, color);
                self.blocked[r * w + c] = true;
                if r > 0 {
                    self.blocked[(r - 1) * w + c] = true;
                }
                if r + 1 < h {
                    self.blocked[(r + 1) * w + c] = true;
                }
                if c > 0 {
                    self.blocked[r * w + c - 1] = true;
                }
                if c + 1 < w {
                    self.blocked[r * w + c + 1] = true;
                }
            }
        }
    }

    /// Try to drop a rectangle with a size drawn from `sizes` inside `region`.
    fn place(&mut self, rng: &mut rng::Rng, color: Token, sizes: &[(usize, usize)], region: &Region) -> bool {
        for _ in 0..RECT_ATTEMPTS {
            let (rh, rw) = sizes[rng.random_range(0..sizes.len())];
            if rh > region.rows.len() || rw > region.cols.len() {
                continue;
            }
            let top = rng.random_range(region.rows.start..=region.rows.end - rh);
            let left = rng.random_range(region.cols.start..=region.cols.end - rw);
            if self.fits(top, left, rh, rw) {
                self.paint(top, left, rh, rw, color);
                return true;
            }
        }
        false
    }
}

fn sizes(max_h: usize, max_w: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    (1..=max_h).flat_map(|h| (1..=max_w).map(move |w| (h, w))).filter(|&(h, w)| keep(h, w)).collect()
}

/// Render a scene that satisfies `spec` exactly. Deterministic in `(spec, seed)`.
pub fn generate_scene(world: &WorldConfig, spec: &PromptSpec, seed: u64) -> Result<TokenGrid> {
    let key: Vec<u64> = world.encode_prompt(spec)?.into_iter().map(|t| t as u64).collect();
    let mut rng = rng::stream(seed, &key);
    let (h, w) = (world.height, world.width);
    let whole = Region { rows: 0..h, cols: 0..w };
    let side = 3.min(h).min(w);
    let any = sizes(side, side, |_, _| true);

    for _ in 0..SCENE_ATTEMPTS {
        let mut canvas = Canvas::new(h, w);
        let ok = match *spec {
            PromptSpec::SingleObject { color } => canvas.place(&mut rng, color, &any, &whole),
            PromptSpec::TwoObject { first, second } => {
                canvas.place(&mut rng, first, &any, &whole) && canvas.place(&mut rng, second, &any, &whole)
            }
            PromptSpec::Counting { color, n } => {
                let small = if n <= 4 { sizes(2, 2, |_, _| true) } else { vec![(1, 1)] };
                (0..n).all(|_| canvas.place(&mut rng, color, &small, &whole))
            }
            PromptSpec::ColorAttr { tall, wide } => {
                let tall_sizes = sizes(side, side, |a, b| a > b);
                let wide_sizes = sizes(side, side, |a, b| b > a);
                canvas.place(&mut rng, tall, &tall_sizes, &whole) && canvas.place(&mut rng, wide, &wide_sizes, &whole)
            }
            PromptSpec::Position { color, quadrant } => {
                let region = quadrant_region(h, w, quadrant);
                canvas.place(&mut rng, color, &any, &region)
            }
        };
        if ok {
            return Ok(canvas.grid);
        }
    }

    if let PromptSpec::Counting { color, n } = *spec {
        // Dense counts: single cells on one checkerboard parity never touch.
        let mut cells: Vec<usize> = (0..h * w).filter(|i| (i / w + i % w) % 2 == 0).collect();
        cells.shuffle(&mut rng);
        let mut grid = TokenGrid::filled(h, w, BACKGROUND);
        for &i in cells.iter().take(n as usize) {
            grid.set(i / w, i % w, color);
        }
        return Ok(grid);
    }
    Err(Error::UnsatisfiableSpec(format!("could not place {spec:?} on a {h}x{w} grid")))
}

fn quadrant_region(h: usize, w: usize, q: Quadrant) -> Region {
    let rows = if q.is_north() { 0..h / 2 } else { h.div_ceil(2)..h };
    let cols = if q.is_west() { 0..w / 2 } else { w.div_ceil(2)..w };
    Region { rows, cols }
}
