//! Masked-token pretraining on Counting scenes, logging held-out CE and
//! saving the result as a checkpoint.
//!
//! ```text
//! cargo run --release --example pretrain_base -- [steps] [out_stem]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use maskfocus::model::{save_checkpoint, Architecture, ModelConfig, ModelParams};
use maskfocus::pretrain::{PretrainConfig, Pretrainer};
use maskfocus::world::{Task, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let stem = PathBuf::from(args.next().unwrap_or_else(|| "base".into()));

    let world = WorldConfig::default();
    let model = ModelConfig { d_model: 64, heads: 2, layers: 2, d_ff: 128, init_std: 0.02 };
    let cfg = PretrainConfig { steps, batch_size: 16, task: Some(Task::Counting), max_count: 4, ..PretrainConfig::default() };
    let params = ModelParams::init(Architecture::new(&world, &model)?, model.init_std, 0);
    println!("{} parameters", params.len());

    let mut trainer = Pretrainer::new(params, world, cfg, 0)?;
    let start = Instant::now();
    for step in 1..=steps {
        let loss = trainer.train_step()?;
        if step % 250 == 0 || step == steps {
            let held_out = trainer.held_out_ce(32)?;
            println!("step {step:>6} batch {loss:.4} held-out {held_out:.4} {:.0}s", start.elapsed().as_secs_f64());
        }
    }
    let path = save_checkpoint(trainer.params(), &stem, 0, steps as u64)?;
    println!("saved {}", path.display());
    Ok(())
}
