//! JSON-lines trajectory export: one record per step per sample.

use serde::{Deserialize, Serialize};

use super::decode::Branch;
use super::rollout::Trajectory;
use crate::css::similarity_series;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub step: usize,
    pub sample: usize,
    pub branch: Branch,
    /// Sample entropy before the step.
    pub entropy: f64,
    /// Masked positions before the step.
    pub n_masked: usize,
    pub committed_positions: Vec<usize>,
    #[serde(rename = "S_t")]
    pub s_t: f64,
}

/// Serialize trajectories, sample-major then step order.
pub fn trajectory_jsonl(trajectories: &[Trajectory]) -> Result<String> {
    let mut out = String::new();
    for traj in trajectories {
        let series = similarity_series(traj)?;
        for (rec, s_t) in traj.steps.iter().zip(series) {
            let line = TrajectoryLine {
                step: rec.step,
                sample: traj.sample,
                branch: rec.branch,
                entropy: rec.sample_entropy,
                n_masked: rec.mask_before.iter().filter(|&&m| m).count(),
                committed_positions: rec.committed.iter().map(|&(p, _)| p).collect(),
                s_t,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn read_trajectory_jsonl(text: &str) -> Result<Vec<TrajectoryLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::MalformedInput(format!("line {}: {e}", i + 1))))
        .collect()
}
