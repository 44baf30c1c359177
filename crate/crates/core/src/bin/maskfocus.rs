use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maskfocus::commands::{self, RlOverrides, EXIT_CONFIG};
use maskfocus::css::StepSelect;
use maskfocus::eval::EvalConfig;
use maskfocus::rl::MaskMode;
use maskfocus::sampler::RoutingMode;

#[derive(Parser)]
#[command(name = "maskfocus", version, about = "Critical-step GRPO on a synthetic token-grid world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Masked-token pretraining of a base model.
    Pretrain {
        config: PathBuf,
    },
    /// GRPO post-training from a base checkpoint.
    RlTrain {
        config: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long, value_parser = parse::<StepSelect>)]
        step_select: Option<StepSelect>,
        #[arg(long, value_parser = parse::<RoutingMode>)]
        sampling: Option<RoutingMode>,
        #[arg(long)]
        cfg_scale: Option<f64>,
        #[arg(long, value_parser = parse::<MaskMode>)]
        mask_mode: Option<MaskMode>,
        #[arg(long)]
        updates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate base and final policies.
        #[arg(long)]
        eval: bool,
    },
    /// Decode samples for one prompt.
    Sample {
        checkpoint: PathBuf,
        /// Prompt spec as JSON, e.g. {"task":"Counting","params":{"color":3,"n":2}}.
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "samples")]
        out: PathBuf,
        /// Read the sampler section from a run config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cfg_scale: Option<f64>,
        #[arg(long, value_parser = parse::<RoutingMode>)]
        sampling: Option<RoutingMode>,
        /// Also write every intermediate estimate as an image.
        #[arg(long)]
        debug_ppm: bool,
    },
    /// Per-step similarity and critical-step table from a trajectory export.
    Analyze {
        trajectories: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "analysis.csv")]
        out: PathBuf,
    },
    /// Strict-reward evaluation of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        /// "all" or comma-separated task names.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 64)]
        n_per_task: usize,
        #[arg(long, default_value_t = 4)]
        max_count: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cfg_scale: Option<f64>,
    },
}

fn parse<T: std::str::FromStr<Err = maskfocus::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: maskfocus::Error| e.to_string())
}

fn init_threads() {
    if let Some(n) = std::env::var("MASKFOCUS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
    }
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Pretrain { config } => commands::cmd_pretrain(&config),
        Command::RlTrain { config, base, step_select, sampling, cfg_scale, mask_mode, updates, seed, out, eval } => {
            let o = RlOverrides { step_select, sampling, cfg_scale, mask_mode, updates, output_dir: out, seed, eval };
            commands::cmd_rl_train(&config, &base, &o)
        }
        Command::Sample { checkpoint, prompt, n, seed, out, config, cfg_scale, sampling, debug_ppm } => {
            match commands::sampler_from(config.as_deref(), cfg_scale, sampling) {
                Ok(s) => commands::cmd_sample(&checkpoint, &prompt, n, &maskfocus::sampler::SamplerConfig { seed, ..s }, &out, debug_ppm),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
        Command::Analyze { trajectories, k, out } => commands::cmd_analyze(&trajectories, k, &out),
        Command::Eval { checkpoint, suite, n_per_task, max_count, seed, out, config, cfg_scale } => {
            let setup = EvalConfig { n_per_task, max_count, ..EvalConfig::default() }
                .with_suite(&suite)
                .and_then(|e| Ok((e, commands::sampler_from(config.as_deref(), cfg_scale, None)?)));
            match setup {
                Ok((e, s)) => commands::cmd_eval(&checkpoint, &e, &s, seed, &out),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let code = run(Cli::parse());
    ExitCode::from(code as u8)
}
