//! Critical step selection: similarity of each intermediate estimate to the
//! final image, per-step information gain, and top-K step choice.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampler::Trajectory;
use crate::world::{cosine_similarity, TokenGrid};

/// `S_t = cos(E_t, E_T)` for `t = 1..=T`.
pub fn similarity_series(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.steps.is_empty() {
        return Err(Error::IncompleteTrajectory("no steps recorded".into()));
    }
    if !traj.final_grid.is_fully_unmasked() {
        return Err(Error::IncompleteTrajectory("final grid still masked".into()));
    }
    let last = &traj.steps[traj.steps.len() - 1];
    if !last.estimate.is_fully_unmasked() || last.estimate != traj.final_grid {
        return Err(Error::IncompleteTrajectory("last estimate differs from final grid".into()));
    }
    let end = traj.final_embedding.as_slice();
    Ok(traj.steps.iter().map(|s| cosine_similarity(s.embedding.as_slice(), end)).collect())
}

/// `V_t = |S_{t+1} - S_t|` for `t = 1..T-1`.
pub fn information_gain(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::TooShort { need: 2, got: series.len() });
    }
    Ok(series.windows(2).map(|w| (w[1] - w[0]).abs()).collect())
}

/// 1-based indices of the `k` largest gains, ties to the earlier step, sorted ascending.
pub fn select_critical(gains: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > gains.len() {
        return Err(Error::KOutOfRange { k, max: gains.len() });
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order[..k].iter().map(|&i| i + 1).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// How optimization steps are chosen from a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSelect {
    /// Top-K information gain.
    #[default]
    Critical,
    /// K distinct steps drawn uniformly from the first 40% of steps.
    RandomEarly,
    /// K steps spaced by a fixed 20%-of-T interval, starting at step 1.
    Window,
    /// Steps `1..=K`.
    Earliest,
}

impl std::str::FromStr for StepSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "critical" => Ok(StepSelect::Critical),
            "random-early" => Ok(StepSelect::RandomEarly),
            "window" | "fixed-window" => Ok(StepSelect::Window),
            "earliest" | "earliest-only" => Ok(StepSelect::Earliest),
            _ => Err(Error::Config(format!("unknown step selection {s:?} (critical, random-early, window, earliest)"))),
        }
    }
}

/// Steps chosen by a non-critical strategy for a trajectory of `steps` steps.
/// Candidate steps are `1..=steps-1`.
pub fn select_by_strategy(mode: StepSelect, gains: &[f64], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let candidates = gains.len();
    if k == 0 || k > candidates {
        return Err(Error::KOutOfRange { k, max: candidates });
    }
    let total_steps = candidates + 1;
    let picked = match mode {
        StepSelect::Critical => return select_critical(gains, k),
        StepSelect::RandomEarly => {
            let early = ((0.4 * total_steps as f64).floor() as usize).clamp(k, candidates);
            let mut v: Vec<usize> = sample(rng, early, k).into_iter().map(|i| i + 1).collect();
            v.sort_unstable();
            v
        }
        StepSelect::Window => {
            let stride = ((0.2 * total_steps as f64).round() as usize).max(1);
            let stride = stride.min((candidates - 1) / (k - 1).max(1)).max(1);
            (0..k).map(|i| 1 + i * stride).collect()
        }
        StepSelect::Earliest => (1..=k).collect(),
    };
    Ok(picked)
}

/// One selected step of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalStepRecord {
    /// Trajectory index within its group.
    pub trajectory: usize,
    /// 1-based step index.
    pub step: usize,
    /// Mask before step `step`.
    pub mask: Vec<bool>,
    pub info_gain: f64,
    pub final_grid: TokenGrid,
}

/// Per-trajectory selection of `k` steps; `k` records per trajectory.
pub fn build_records(
    group: &[Trajectory],
    k: usize,
    mode: StepSelect,
    rng: &mut Rng,
) -> Result<Vec<CriticalStepRecord>> {
    let mut out = Vec::with_capacity(group.len() * k);
    for traj in group {
        let gains = information_gain(&similarity_series(traj)?)?;
        for step in select_by_strategy(mode, &gains, k, rng)? {
            out.push(CriticalStepRecord {
                trajectory: traj.sample,
                step,
                mask: traj.steps[step - 1].mask_before.clone(),
                info_gain: gains[step - 1],
                final_grid: traj.final_grid.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn gain_hand_example() {
        let v = information_gain(&[0.2, 0.5, 0.6, 0.9, 0.95, 1.0]).unwrap();
        let expect = [0.3, 0.1, 0.3, 0.05, 0.05];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(information_gain(&[1.0; 4]).unwrap(), vec![0.0; 3]);
        assert!(matches!(information_gain(&[1.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn reversing_increasing_series_keeps_gains() {
        let s = [0.1, 0.3, 0.35, 0.8, 1.0];
        let mut r = s;
        r.reverse();
        let mut a = information_gain(&s).unwrap();
        a.reverse();
        assert_eq!(a, information_gain(&r).unwrap());
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_critical(&[0.3, 0.1, 0.3, 0.05, 0.05], 2).unwrap(), vec![1, 3]);
        assert_eq!(select_critical(&[0.3, 0.1, 0.3, 0.05, 0.05], 5).unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(select_critical(&[0.0, 0.0, 0.9, 0.1], 1).unwrap(), vec![3]);
        // exact tie: earlier index wins
        assert_eq!(select_critical(&[0.2, 0.5, 0.5, 0.5], 2).unwrap(), vec![2, 3]);
        assert!(matches!(select_critical(&[0.1, 0.2], 3), Err(Error::KOutOfRange { .. })));
        assert!(matches!(select_critical(&[0.1, 0.2], 0), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn strategies_for_twelve_steps() {
        let gains = vec![0.1; 11];
        let mut r = rng::stream(0, &[]);
        assert_eq!(select_by_strategy(StepSelect::Earliest, &gains, 3, &mut r).unwrap(), vec![1, 2, 3]);
        assert_eq!(select_by_strategy(StepSelect::Window, &gains, 3, &mut r).unwrap(), vec![1, 3, 5]);
        for _ in 0..100 {
            let v = select_by_strategy(StepSelect::RandomEarly, &gains, 3, &mut r).unwrap();
            assert_eq!(v.len(), 3);
            assert!(v.iter().all(|&s| (1..=4).contains(&s)));
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
