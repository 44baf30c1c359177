//! Dynamic routing on one group: per step, which samples were sent to
//! confidence sampling and which explored with an entropy-scaled temperature.
//!
//! ```text
//! cargo run --release --example dr_sampling -- [checkpoint.json]
//! ```

use maskfocus::commands::world_of;
use maskfocus::model::{load_checkpoint, Architecture, ModelConfig, ModelParams};
use maskfocus::sampler::{rollout_group, Branch, SamplerConfig};
use maskfocus::world::{reward, PromptSpec, RewardMode, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let default_world = WorldConfig::default();
    let params = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path.as_ref())?.0,
        None => {
            let model = ModelConfig::default();
            ModelParams::init(Architecture::new(&default_world, &model)?, model.init_std, 1)
        }
    };
    let world = world_of(params.arch());
    let spec = PromptSpec::Counting { color: 3, n: 2 };
    let sampler = SamplerConfig { seed: 5, ..SamplerConfig::default() };
    let group = rollout_group(&params, &world, &spec, 8, &sampler)?;

    println!("step  branches (X exploit, e explore)  sample entropies");
    for k in 0..sampler.steps {
        let tags: String = group
            .iter()
            .map(|t| match t.steps[k].branch {
                Branch::Exploit => 'X',
                Branch::Explore => 'e',
                Branch::Standard => '.',
            })
            .collect();
        let h: Vec<String> = group.iter().map(|t| format!("{:.2}", t.steps[k].sample_entropy)).collect();
        println!("{:>4}  {tags:<33} {}", k + 1, h.join(" "));
    }
    for t in &group {
        let temps = &t.steps[0].temperatures;
        let mean_temp = temps.iter().sum::<f64>() / temps.len() as f64;
        println!(
            "sample {} shaped reward {:.2}, step-1 mean temperature {mean_temp:.3}",
            t.sample,
            reward(&t.final_grid, &spec, RewardMode::Shaped)?
        );
    }
    Ok(())
}
