use std::f64::consts::FRAC_PI_2;

/// Cosine mask schedule: fraction of tokens still masked at progress `u`.
pub fn gamma(u: f64) -> f64 {
    (FRAC_PI_2 * u).cos()
}

/// Masked-token counts `m_0 ..= m_T` for `n` tokens over `steps` steps.
///
/// `m_t = floor(n * gamma(t / T))` for `0 < t < T`, clamped so every step
/// commits at least one token (a zero-commit step borrows one token from
/// the next step). Requires `steps >= 1` and `n >= steps`.
pub fn mask_schedule(n: usize, steps: usize) -> Vec<usize> {
    assert!(steps >= 1 && n >= steps, "schedule needs n >= steps >= 1 (n = {n}, steps = {steps})");
    let mut m = Vec::with_capacity(steps + 1);
    m.push(n);
    for t in 1..steps {
        let raw = (n as f64 * gamma(t as f64 / steps as f64)).floor() as usize;
        let prev = m[t - 1];
        m.push(raw.min(prev - 1).max(steps - t));
    }
    m.push(0);
    m
}

/// Number of tokens still masked after step `t` (`m_0 = n`, `m_T = 0`).
pub fn mask_count(t: usize, n: usize, steps: usize) -> usize {
    assert!(t <= steps, "step {t} beyond schedule of {steps}");
    mask_schedule(n, steps)[t]
}
