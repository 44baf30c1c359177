use super::graph::{Graph, Var};
use super::transformer::LogitsGrid;

/// Classifier-free guidance: `cond + s * (cond - uncond)`.
///
/// `s = 0` returns `cond` bit-for-bit.
pub fn guided_logits(cond: &LogitsGrid, uncond: &LogitsGrid, scale: f64) -> LogitsGrid {
    assert_eq!(cond.values.len(), uncond.values.len(), "guided_logits: shape mismatch");
    let mut out = cond.clone();
    if scale != 0.0 {
        out.values = cond.values.iter().zip(&uncond.values).map(|(&c, &u)| guide(c, u, scale)).collect();
        out.cfg_applied = true;
    }
    out
}

#[inline]
pub(crate) fn guide(c: f64, u: f64, scale: f64) -> f64 {
    c + scale * (c - u)
}

/// Graph form of [`guided_logits`].
pub fn guided_graph(g: &mut Graph, cond: Var, uncond: Var, scale: f64) -> Var {
    if scale == 0.0 {
        return cond;
    }
    let diff = g.sub(cond, uncond);
    let push = g.scale(diff, scale);
    g.add(cond, push)
}
