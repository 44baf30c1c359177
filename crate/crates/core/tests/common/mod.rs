#![allow(dead_code)]

use maskfocus::model::{Architecture, ModelConfig, ModelParams};
use maskfocus::rng;
use maskfocus::world::WorldConfig;
use rand_distr::{Distribution, StandardNormal};

pub fn tiny_world() -> WorldConfig {
    WorldConfig { height: 4, width: 4, n_colors: 4, prompt_len: 5 }
}

pub fn tiny_model() -> ModelConfig {
    ModelConfig { d_model: 16, heads: 2, layers: 1, d_ff: 32, init_std: 0.3 }
}

pub fn tiny_params(seed: u64) -> ModelParams {
    let arch = Architecture::new(&tiny_world(), &tiny_model()).unwrap();
    ModelParams::init(arch, 0.3, seed)
}

/// Unit-norm random direction in parameter space.
pub fn random_direction(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[0xd1]);
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn shifted(params: &ModelParams, dir: &[f64], h: f64) -> ModelParams {
    let mut p = params.clone();
    p.as_mut_slice().iter_mut().zip(dir).for_each(|(x, d)| *x += h * d);
    p
}

/// Largest relative error between the analytic directional derivative
/// `grad . v` and the central difference of `f` over `directions` random `v`.
pub fn max_directional_error(
    params: &ModelParams,
    grad: &[f64],
    directions: usize,
    h: f64,
    f: impl Fn(&ModelParams) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..directions {
        let v = random_direction(params.len(), k as u64);
        let analytic: f64 = grad.iter().zip(&v).map(|(g, d)| g * d).sum();
        let numeric = (f(&shifted(params, &v, h)) - f(&shifted(params, &v, -h))) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    worst
}
