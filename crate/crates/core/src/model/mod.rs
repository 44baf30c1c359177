//! Bidirectional token predictor, guidance, masked likelihood, gradients and
//! optimization.

mod checkpoint;
mod graph;
mod guidance;
mod likelihood;
mod optim;
mod params;
mod transformer;

use rayon::prelude::*;

pub use checkpoint::{checkpoint_paths, load_checkpoint, quantize_f32, save_checkpoint, Manifest, TensorEntry};
pub use graph::{Graph, Var};
pub use guidance::{guided_graph, guided_logits};
pub use likelihood::{
    masked_log_likelihood, masked_log_likelihood_graph, policy_log_probs_graph, MaskedCompletion, PolicyEval,
};
pub use optim::{adam_step, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use params::{Architecture, ModelConfig, ModelParams, ParamId, ParamSpec};
pub use transformer::{forward, forward_graph, softmax, LogitsGrid};

use crate::error::{Error, Result};

fn check_finite(loss: f64, grads: &[f64]) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(())
}

/// Value and exact reverse-mode gradient of a scalar objective built on a
/// fresh graph over `params`.
pub fn loss_and_grad<F>(params: &ModelParams, objective: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(params);
    let loss = objective(&mut g)?;
    let value = g.scalar(loss);
    let grads = g.backward(loss)?;
    check_finite(value, &grads)?;
    Ok((value, grads))
}

/// Sum of per-item objectives and its gradient. Items are evaluated in
/// parallel on independent graphs and reduced in item order, so the result
/// does not depend on the worker count.
pub fn loss_and_grad_sum<T, F>(params: &ModelParams, items: &[T], objective: F) -> Result<(f64, Vec<f64>)>
where
    T: Sync,
    F: Fn(&mut Graph<'_>, &T) -> Result<Var> + Sync,
{
    let parts: Vec<(f64, Vec<f64>)> = items
        .par_iter()
        .map(|item| {
            let mut g = Graph::new(params);
            let loss = objective(&mut g, item)?;
            Ok((g.scalar(loss), g.backward(loss)?))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut grads = vec![0.0; params.len()];
    for (l, gr) in &parts {
        total += l;
        grads.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
    }
    check_finite(total, &grads)?;
    Ok((total, grads))
}
