//! GRPO post-training of a pretrained checkpoint on Counting, printing the
//! training reward and loss diagnostics as it goes.
//!
//! ```text
//! cargo run --release --example grpo_train -- base.json [updates] [lr]
//! ```

use maskfocus::eval::{evaluate, EvalConfig};
use maskfocus::commands::world_of;
use maskfocus::model::load_checkpoint;
use maskfocus::rl::{TrainConfig, Trainer};
use maskfocus::sampler::SamplerConfig;
use maskfocus::world::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let base = args.next().ok_or("usage: grpo_train base.json [updates] [lr]")?;
    let updates: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let lr: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2e-4);

    let (params, _) = load_checkpoint(base.as_ref())?;
    let world = world_of(params.arch());
    let sampler = SamplerConfig::default();
    let eval_cfg = EvalConfig { tasks: vec![Task::Counting], n_per_task: 112, max_count: 4 };
    let before = evaluate(&params, &world, &sampler, &eval_cfg, 1)?.overall;

    let cfg = TrainConfig { updates, lr, ..TrainConfig::default() };
    let mut trainer = Trainer::new(params, world.clone(), sampler.clone(), cfg, 0)?;
    let mut window = Vec::new();
    trainer.run(|t, m| {
        window.push(m.mean_reward);
        if t.updates_done() % 25 == 0 {
            let row = m.rows.last().expect("one row per update");
            println!(
                "update {:>5} reward {:.3} loss {:+.4} kl {:.4} clip {:.3}",
                t.updates_done(),
                window.iter().sum::<f64>() / window.len() as f64,
                row.loss,
                row.kl,
                row.clip_frac
            );
            window.clear();
        }
        Ok(())
    })?;
    let after = evaluate(trainer.theta(), &world, &sampler, &eval_cfg, 1)?.overall;
    println!("strict Counting: {before:.3} -> {after:.3}");
    Ok(())
}
