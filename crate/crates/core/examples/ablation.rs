//! Same base, same budget, different step selection and sampling: final
//! strict Counting score for each configuration.
//!
//! ```text
//! cargo run --release --example ablation -- base.json [updates]
//! ```

use maskfocus::css::StepSelect;
use maskfocus::eval::EvalConfig;
use maskfocus::harness::Experiment;
use maskfocus::commands::world_of;
use maskfocus::model::load_checkpoint;
use maskfocus::rl::TrainConfig;
use maskfocus::sampler::{RoutingMode, SamplerConfig};
use maskfocus::world::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let base = args.next().ok_or("usage: ablation base.json [updates]")?;
    let updates: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let (params, _) = load_checkpoint(base.as_ref())?;

    let runs = [
        ("critical + dr", StepSelect::Critical, RoutingMode::Dr),
        ("window + dr", StepSelect::Window, RoutingMode::Dr),
        ("earliest + dr", StepSelect::Earliest, RoutingMode::Dr),
        ("random-early + dr", StepSelect::RandomEarly, RoutingMode::Dr),
        ("critical + standard", StepSelect::Critical, RoutingMode::Standard),
    ];
    for (name, step_select, routing) in runs {
        let mut sampler = SamplerConfig::default();
        sampler.routing.mode = routing;
        let exp = Experiment {
            world: world_of(params.arch()),
            sampler,
            rl: TrainConfig { updates, lr: 2e-4, step_select, ..TrainConfig::default() },
            eval: EvalConfig { tasks: vec![Task::Counting], n_per_task: 112, max_count: 4 },
            seed: 0,
            eval_seed: 1,
        };
        let out = exp.run(&params, |_, _| {})?;
        println!("{name:<20} base {:.3} final {:.3} gain {:+.3}", out.base.overall, out.trained.overall, out.gain());
    }
    Ok(())
}
