use rayon::prelude::*;

use super::{k3, shuffle_mask, MaskMode};
use crate::css::CriticalStepRecord;
use crate::error::{Error, Result};
use crate::model::{masked_log_likelihood, masked_log_likelihood_graph, Graph, MaskedCompletion, ModelParams, PolicyEval};
use crate::rng;

/// Versions of the rollout and reference policies a batch was cached under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotIds {
    pub old: u64,
    pub reference: u64,
}

/// One optimized step: the re-masked completion and its cached log-probs.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEntry {
    pub record: CriticalStepRecord,
    pub completion: MaskedCompletion,
    pub advantage: f64,
    /// Rollout-policy log-probs at the completion's masked positions.
    pub old_logp: Vec<f64>,
    pub ref_logp: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrpoBatch {
    pub entries: Vec<BatchEntry>,
    pub snapshot: Option<SnapshotIds>,
}

/// Diagnostics of one loss evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub policy_loss: f64,
    pub kl: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub clip_frac: f64,
    pub tokens: usize,
    /// Gradient norm before clipping (0 when no gradient was taken).
    pub grad_norm: f64,
}

impl GrpoBatch {
    /// Re-mask each record, build its completion and cache the rollout and
    /// reference log-probs. Equal snapshot ids mean the two policies are the
    /// same parameters, and the reference pass is skipped.
    #[allow(clippy::too_many_arguments)]
    pub fn collect(
        records: Vec<(CriticalStepRecord, Vec<usize>, f64)>,
        old: &ModelParams,
        reference: &ModelParams,
        snapshot: SnapshotIds,
        mask_mode: MaskMode,
        eval: PolicyEval,
        seed: u64,
    ) -> Result<GrpoBatch> {
        let entries = records
            .into_par_iter()
            .enumerate()
            .map(|(i, (record, prompt, advantage))| {
                let mask = match mask_mode {
                    MaskMode::Shuffle => shuffle_mask(&record.mask, &mut rng::stream(seed, &[i as u64])),
                    MaskMode::Trajectory => record.mask.clone(),
                };
                let completion = MaskedCompletion::new(prompt, record.final_grid.clone(), mask)?;
                let (_, old_logp) = masked_log_likelihood(old, &completion, eval)?;
                let ref_logp = if snapshot.old == snapshot.reference {
                    old_logp.clone()
                } else {
                    masked_log_likelihood(reference, &completion, eval)?.1
                };
                Ok(BatchEntry { record, completion, advantage, old_logp, ref_logp })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GrpoBatch { entries, snapshot: Some(snapshot) })
    }

    pub fn n_tokens(&self) -> usize {
        self.entries.iter().map(|e| e.old_logp.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries `range` as a batch under the same snapshot.
    pub fn slice(&self, range: std::ops::Range<usize>) -> GrpoBatch {
        GrpoBatch { entries: self.entries[range].to_vec(), snapshot: self.snapshot }
    }
}

/// Clipped-surrogate settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub eval: PolicyEval,
}

struct EntryStats {
    loss: f64,
    surrogate: f64,
    kl: f64,
    ratio_sum: f64,
    ratio_max: f64,
    clipped: usize,
    grads: Option<Vec<f64>>,
}

fn entry_objective(
    params: &ModelParams,
    entry: &BatchEntry,
    obj: &Objective,
    n_tok: f64,
    with_grad: bool,
) -> Result<EntryStats> {
    let n = entry.old_logp.len();
    if entry.ref_logp.len() != n || entry.completion.masked_positions().len() != n {
        return Err(Error::ShapeMismatch("cached log-probs do not match the completion mask".into()));
    }
    let mut g = Graph::new(params);
    let lp = masked_log_likelihood_graph(&mut g, &entry.completion, obj.eval)?;
    let old = g.constant(n, 1, entry.old_logp.clone());
    let reference = g.constant(n, 1, entry.ref_logp.clone());
    let ones = g.constant(n, 1, vec![1.0; n]);

    let log_ratio = g.sub(lp, old);
    let ratio = g.exp(log_ratio);
    let unclipped = g.scale(ratio, entry.advantage);
    let bounded = g.clamp(ratio, 1.0 - obj.clip_eps, 1.0 + obj.clip_eps);
    let clipped = g.scale(bounded, entry.advantage);
    let surr = g.min(unclipped, clipped);
    let surr_sum = g.sum(surr);

    let d = g.sub(reference, lp);
    let ed = g.exp(d);
    let k = g.sub(ed, d);
    let k = g.sub(k, ones);
    let kl_sum = g.sum(k);

    let a = g.scale(surr_sum, -1.0 / n_tok);
    let b = g.scale(kl_sum, obj.kl_beta / n_tok);
    let loss = g.add(a, b);

    let r = g.value(ratio);
    let (u, c) = (g.value(unclipped), g.value(clipped));
    let stats = EntryStats {
        loss: g.scalar(loss),
        surrogate: g.scalar(surr_sum),
        kl: entry.ref_logp.iter().zip(g.value(lp)).map(|(r, t)| k3(r - t)).sum(),
        ratio_sum: r.iter().sum(),
        ratio_max: r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        clipped: u.iter().zip(c).filter(|(u, c)| c < u).count(),
        grads: if with_grad { Some(g.backward(loss)?) } else { None },
    };
    Ok(stats)
}

fn evaluate(
    batch: &GrpoBatch,
    params: &ModelParams,
    obj: &Objective,
    expected: SnapshotIds,
    with_grad: bool,
) -> Result<(LossReport, Option<Vec<f64>>)> {
    match batch.snapshot {
        Some(s) if s == expected => {}
        Some(s) => {
            return Err(Error::StaleSnapshot { cached: (s.old, s.reference), expected: (expected.old, expected.reference) })
        }
        None => return Err(Error::StaleSnapshot { cached: (u64::MAX, u64::MAX), expected: (expected.old, expected.reference) }),
    }
    let n_tok = batch.n_tokens();
    if n_tok == 0 {
        return Err(Error::EmptyMask);
    }
    let parts: Vec<EntryStats> = batch
        .entries
        .par_iter()
        .map(|e| entry_objective(params, e, obj, n_tok as f64, with_grad))
        .collect::<Result<_>>()?;

    let mut report = LossReport { tokens: n_tok, max_ratio: f64::NEG_INFINITY, ..LossReport::default() };
    let mut grads = with_grad.then(|| vec![0.0; params.len()]);
    let (mut surrogate, mut kl, mut ratio_sum, mut clipped) = (0.0, 0.0, 0.0, 0);
    for p in &parts {
        report.loss += p.loss;
        surrogate += p.surrogate;
        kl += p.kl;
        ratio_sum += p.ratio_sum;
        report.max_ratio = report.max_ratio.max(p.ratio_max);
        clipped += p.clipped;
        if let (Some(acc), Some(g)) = (grads.as_mut(), p.grads.as_ref()) {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
    let n = n_tok as f64;
    report.policy_loss = -surrogate / n;
    report.kl = kl / n;
    report.mean_ratio = ratio_sum / n;
    report.clip_frac = clipped as f64 / n;
    if !report.loss.is_finite() {
        return Err(Error::NonFinite("grpo loss".into()));
    }
    if let Some(g) = &grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grpo gradient".into()));
        }
        report.grad_norm = crate::model::global_norm(g);
    }
    Ok((report, grads))
}

/// `-(1/N_tok) sum min(r A, clip(r) A) + beta * KL` over every masked token of the batch.
pub fn grpo_loss(batch: &GrpoBatch, params: &ModelParams, obj: &Objective, expected: SnapshotIds) -> Result<(f64, LossReport)> {
    let (report, _) = evaluate(batch, params, obj, expected, false)?;
    Ok((report.loss, report))
}

/// [`grpo_loss`] plus its gradient with respect to `params`.
pub fn grpo_loss_and_grad(
    batch: &GrpoBatch,
    params: &ModelParams,
    obj: &Objective,
    expected: SnapshotIds,
) -> Result<(LossReport, Vec<f64>)> {
    let (report, grads) = evaluate(batch, params, obj, expected, true)?;
    Ok((report, grads.unwrap_or_default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, ModelConfig};
    use crate::world::{generate_scene, PromptSpec, WorldConfig};

    fn tiny() -> (WorldConfig, ModelParams) {
        let world = WorldConfig { height: 3, width: 3, n_colors: 4, prompt_len: 5 };
        let model = ModelConfig { d_model: 8, heads: 2, layers: 1, d_ff: 8, init_std: 0.3 };
        (world.clone(), ModelParams::init(Architecture::new(&world, &model).unwrap(), 0.3, 5))
    }

    fn batch(world: &WorldConfig, params: &ModelParams, adv: f64) -> GrpoBatch {
        let spec = PromptSpec::Counting { color: 1, n: 1 };
        let grid = generate_scene(world, &spec, 3).unwrap();
        let rec = CriticalStepRecord {
            trajectory: 0,
            step: 1,
            mask: vec![true, false, true, false, true, false, false, true, false],
            info_gain: 0.1,
            final_grid: grid,
        };
        let prompt = world.encode_prompt(&spec).unwrap();
        let ids = SnapshotIds { old: 0, reference: 0 };
        let eval = PolicyEval { cfg_scale: 2.0, temperature: 1.0 };
        GrpoBatch::collect(vec![(rec, prompt, adv)], params, params, ids, MaskMode::Shuffle, eval, 1).unwrap()
    }

    #[test]
    fn on_policy_ratio_is_exactly_one() {
        let (world, params) = tiny();
        let b = batch(&world, &params, 0.7);
        let obj = Objective { clip_eps: 0.2, kl_beta: 0.01, eval: PolicyEval { cfg_scale: 2.0, temperature: 1.0 } };
        let ids = SnapshotIds { old: 0, reference: 0 };
        let (loss, rep) = grpo_loss(&b, &params, &obj, ids).unwrap();
        assert_eq!(rep.mean_ratio, 1.0);
        assert_eq!(rep.max_ratio, 1.0);
        assert_eq!(rep.clip_frac, 0.0);
        assert_eq!(rep.kl, 0.0);
        assert!((loss + 0.7).abs() < 1e-12);
    }

    #[test]
    fn stale_snapshot_rejected() {
        let (world, params) = tiny();
        let b = batch(&world, &params, 1.0);
        let obj = Objective { clip_eps: 0.2, kl_beta: 0.0, eval: PolicyEval::default() };
        let r = grpo_loss(&b, &params, &obj, SnapshotIds { old: 1, reference: 0 });
        assert!(matches!(r, Err(Error::StaleSnapshot { .. })));
    }

    #[test]
    fn zero_advantage_zero_kl_gives_zero_gradient() {
        let (world, params) = tiny();
        let b = batch(&world, &params, 0.0);
        let obj = Objective { clip_eps: 0.2, kl_beta: 0.0, eval: PolicyEval { cfg_scale: 2.0, temperature: 1.0 } };
        let (rep, g) = grpo_loss_and_grad(&b, &params, &obj, SnapshotIds { old: 0, reference: 0 }).unwrap();
        assert_eq!(rep.loss, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }
}
