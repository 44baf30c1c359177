//! Iterative masked decoding with a cosine schedule, confidence-based
//! commitment and entropy-routed dynamic-temperature sampling.

mod decode;
mod entropy;
mod export;
mod rollout;
mod schedule;

pub use decode::{
    commit_step, intermediate_estimate, prepare_step, sample_step, Branch, DecodeState, SamplerConfig, StepInputs,
    StepRecord,
};
pub use entropy::{dynamic_temperature, sample_entropy, token_entropy, RoutingConfig, RoutingMode};
pub use export::{read_trajectory_jsonl, trajectory_jsonl, TrajectoryLine};
pub use rollout::{rollout_group, route, sample_single, Trajectory};
pub use schedule::{gamma, mask_count, mask_schedule};
