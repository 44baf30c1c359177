mod common;

use maskfocus::sampler::{
    dynamic_temperature, gamma, mask_count, mask_schedule, rollout_group, route, token_entropy, Branch, RoutingConfig,
    RoutingMode, SamplerConfig,
};
use maskfocus::world::PromptSpec;
use proptest::prelude::*;

proptest! {
    #[test]
    fn schedule_is_strictly_decreasing_and_telescopes(n in 2usize..200, t in 2usize..40) {
        prop_assume!(t <= n);
        let m = mask_schedule(n, t);
        prop_assert_eq!(m.len(), t + 1);
        prop_assert_eq!(m[0], n);
        prop_assert_eq!(m[t], 0);
        for k in 1..=t {
            prop_assert!(m[k] < m[k - 1]);
            prop_assert_eq!(m[k], mask_count(k, n, t));
        }
        let commits: usize = (1..=t).map(|k| m[k - 1] - m[k]).sum();
        prop_assert_eq!(commits, n);
    }

    #[test]
    fn gamma_bounds(u in 0.0f64..=1.0) {
        let g = gamma(u);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn entropy_is_bounded(raw in prop::collection::vec(0.0f64..1.0, 2..12)) {
        let z: f64 = raw.iter().sum();
        prop_assume!(z > 1e-6);
        let p: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let h = token_entropy(&p).unwrap();
        prop_assert!(h >= 0.0 && h <= (p.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn temperature_decreases_within_bounds(a in 0.0f64..5.0, b in 0.0f64..5.0, t_max in 0.1f64..3.0, alpha in 0.1f64..3.0, floor in 0.0f64..1.0) {
        let cfg = RoutingConfig { mode: RoutingMode::Dr, t_max, alpha, theta_floor: floor };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (tl, th) = (dynamic_temperature(lo, &cfg), dynamic_temperature(hi, &cfg));
        prop_assert!(th <= tl);
        prop_assert!(th >= floor && tl <= t_max + floor);
    }

    #[test]
    fn routing_splits_by_entropy(e in prop::collection::vec(0.0f64..2.0, 2..17)) {
        let b = route(&e, RoutingMode::Dr);
        let exploit: Vec<f64> = (0..e.len()).filter(|&i| b[i] == Branch::Exploit).map(|i| e[i]).collect();
        let explore: Vec<f64> = (0..e.len()).filter(|&i| b[i] == Branch::Explore).map(|i| e[i]).collect();
        prop_assert_eq!(exploit.len(), e.len().div_ceil(2));
        prop_assert_eq!(explore.len(), e.len() / 2);
        let min_exploit = exploit.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_explore = explore.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min_exploit >= max_explore);
    }
}

#[test]
fn disabled_routing_tags_every_step_standard() {
    let params = common::tiny_params(3);
    let cfg = SamplerConfig {
        steps: 5,
        routing: RoutingConfig { mode: RoutingMode::Standard, ..RoutingConfig::default() },
        ..SamplerConfig::default()
    };
    let trajs = rollout_group(&params, &common::tiny_world(), &PromptSpec::SingleObject { color: 2 }, 4, &cfg).unwrap();
    assert!(trajs.iter().flat_map(|t| &t.steps).all(|s| s.branch == Branch::Standard));
}

#[test]
fn rollouts_repeat_under_a_fixed_seed() {
    let params = common::tiny_params(3);
    let cfg = SamplerConfig { steps: 6, seed: 21, ..SamplerConfig::default() };
    let spec = PromptSpec::Counting { color: 1, n: 2 };
    let a = rollout_group(&params, &common::tiny_world(), &spec, 6, &cfg).unwrap();
    let b = rollout_group(&params, &common::tiny_world(), &spec, 6, &cfg).unwrap();
    assert_eq!(a, b);
}
