//! One procedurally generated scene per task, printed as digits with its
//! strict and shaped rewards. Pass a directory to also write PPM images.
//!
//! ```text
//! cargo run --example scene_gallery -- [out_dir]
//! ```

use maskfocus::world::{generate_scene, reward, write_ppm, PromptSpec, Quadrant, RewardMode, TokenGrid, WorldConfig};

fn show(grid: &TokenGrid) {
    for r in 0..grid.height {
        let row: String = (0..grid.width).map(|c| char::from(b'0' + grid.get(r, c))).collect();
        println!("  {row}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let world = WorldConfig::default();
    let specs = [
        PromptSpec::SingleObject { color: 2 },
        PromptSpec::TwoObject { first: 1, second: 5 },
        PromptSpec::Counting { color: 3, n: 3 },
        PromptSpec::ColorAttr { tall: 4, wide: 6 },
        PromptSpec::Position { color: 1, quadrant: Quadrant::NE },
    ];
    for (i, spec) in specs.iter().enumerate() {
        let grid = generate_scene(&world, spec, 7)?;
        println!(
            "{} strict={} shaped={}",
            serde_json::to_string(spec).unwrap(),
            reward(&grid, spec, RewardMode::Strict)?,
            reward(&grid, spec, RewardMode::Shaped)?
        );
        show(&grid);
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("scene_{i}.ppm")), write_ppm(&grid, 16))?;
        }
    }
    Ok(())
}
