use super::TokenGrid;

const PALETTE: [[u8; 3]; 8] = [
    [20, 20, 24],
    [230, 60, 50],
    [60, 180, 75],
    [60, 110, 230],
    [250, 210, 50],
    [200, 80, 200],
    [70, 210, 220],
    [245, 245, 245],
];

/// RGB color for a token; extends the base palette by hashing for large codebooks.
pub fn palette_color(token: u8) -> [u8; 3] {
    match PALETTE.get(token as usize) {
        Some(c) => *c,
        None => {
            let h = (token as u32).wrapping_mul(2_654_435_761);
            [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
        }
    }
}

/// Binary PPM (P6) with one `scale x scale` block per token. Masked cells are mid-gray.
pub fn write_ppm(grid: &TokenGrid, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (pw, ph) = (grid.width * scale, grid.height * scale);
    let mut out = format!("P6\n{pw} {ph}\n255\n").into_bytes();
    out.reserve(pw * ph * 3);
    for py in 0..ph {
        for px in 0..pw {
            let i = (py / scale) * grid.width + px / scale;
            let rgb = if grid.mask[i] { [128, 128, 128] } else { palette_color(grid.tokens[i]) };
            out.extend_from_slice(&rgb);
        }
    }
    out
}
