//! Similarity to the final image per step, the information gain between
//! steps, and the steps each selection strategy would train on.
//!
//! ```text
//! cargo run --release --example critical_steps -- [checkpoint.json] [k]
//! ```

use maskfocus::css::{information_gain, select_by_strategy, similarity_series, StepSelect};
use maskfocus::commands::world_of;
use maskfocus::model::{load_checkpoint, Architecture, ModelConfig, ModelParams};
use maskfocus::rng;
use maskfocus::sampler::{sample_single, SamplerConfig};
use maskfocus::world::{PromptSpec, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let default_world = WorldConfig::default();
    let params = match args.next() {
        Some(path) if path != "-" => load_checkpoint(path.as_ref())?.0,
        _ => {
            let model = ModelConfig::default();
            ModelParams::init(Architecture::new(&default_world, &model)?, model.init_std, 2)
        }
    };
    let world = world_of(params.arch());
    let k: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let spec = PromptSpec::TwoObject { first: 2, second: 6 };
    let traj = sample_single(&params, &world, &spec, &SamplerConfig::default(), 11)?;

    let s = similarity_series(&traj)?;
    let v = information_gain(&s)?;
    println!("step   S_t      V_t");
    for (t, st) in s.iter().enumerate() {
        let vt = v.get(t).map(|x| format!("{x:.4}")).unwrap_or_default();
        println!("{:>4}  {st:.4}  {vt}", t + 1);
    }
    for mode in [StepSelect::Critical, StepSelect::Window, StepSelect::Earliest, StepSelect::RandomEarly] {
        let picked = select_by_strategy(mode, &v, k, &mut rng::stream(0, &[]))?;
        println!("{mode:?}: {picked:?}");
    }
    Ok(())
}
