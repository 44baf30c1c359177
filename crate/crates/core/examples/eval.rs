//! Strict per-task scores of a checkpoint, written as CSV to stdout.
//!
//! ```text
//! cargo run --release --example eval -- model.json [n_per_task]
//! ```

use maskfocus::eval::{evaluate, EvalConfig};
use maskfocus::commands::world_of;
use maskfocus::model::load_checkpoint;
use maskfocus::sampler::SamplerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().ok_or("usage: eval model.json [n_per_task]")?;
    let n_per_task: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(32);
    let (params, _) = load_checkpoint(path.as_ref())?;
    let cfg = EvalConfig { n_per_task, ..EvalConfig::default() };
    let summary = evaluate(&params, &world_of(params.arch()), &SamplerConfig::default(), &cfg, 0)?;
    print!("{}", summary.to_csv());
    Ok(())
}
