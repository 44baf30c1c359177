use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn token_entropy(dist: &[f64]) -> Result<f64> {
    if dist.is_empty() || dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("{dist:?}")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    let h = -dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    Ok(h.clamp(0.0, (dist.len() as f64).ln()))
}

/// Mean token entropy over the currently masked positions.
pub fn sample_entropy(masked_entropies: &[f64]) -> Result<f64> {
    if masked_entropies.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(masked_entropies.iter().sum::<f64>() / masked_entropies.len() as f64)
}

/// Which samples get routed where within a group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// High-entropy half exploits, low-entropy half explores.
    #[default]
    Dr,
    /// Plain confidence sampling for every sample.
    Standard,
    /// Entropy-modulated temperature for every sample.
    EntropyAll,
}

impl std::str::FromStr for RoutingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(RoutingMode::Dr),
            "standard" => Ok(RoutingMode::Standard),
            "entropy-all" => Ok(RoutingMode::EntropyAll),
            _ => Err(Error::Config(format!("unknown sampling mode {s:?} (dr, standard, entropy-all)"))),
        }
    }
}

/// Entropy-routed sampling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingConfig {
    pub mode: RoutingMode,
    /// Maximum temperature added on top of the floor.
    pub t_max: f64,
    /// Decay rate of temperature with increasing entropy.
    pub alpha: f64,
    /// Temperature lower bound.
    pub theta_floor: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig { mode: RoutingMode::Dr, t_max: 1.0, alpha: 1.0, theta_floor: 0.5 }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.alpha > 0.0 && self.theta_floor >= 0.0) {
            return Err(Error::Config(format!("routing needs t_max > 0, alpha > 0, theta_floor >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// `T * exp(-H / alpha) + theta`: hotter for confident (low-entropy) positions.
pub fn dynamic_temperature(entropy: f64, cfg: &RoutingConfig) -> f64 {
    cfg.t_max * (-entropy / cfg.alpha).exp() + cfg.theta_floor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert!((token_entropy(&[0.125; 8]).unwrap() - 8f64.ln()).abs() < 1e-12);
        assert_eq!(token_entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((token_entropy(&[0.5, 0.25, 0.25]).unwrap() - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!(token_entropy(&[0.5, 0.4]).is_err());
        assert!(token_entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn sample_entropy_is_mean() {
        assert!((sample_entropy(&[0.2, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(sample_entropy(&[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn temperature_curve() {
        let cfg = RoutingConfig { mode: RoutingMode::Dr, t_max: 1.0, alpha: 1.0, theta_floor: 0.1 };
        assert_eq!(dynamic_temperature(0.0, &cfg), 1.1);
        assert!((dynamic_temperature(1.0, &cfg) - ((-1f64).exp() + 0.1)).abs() < 1e-15);
        assert!((dynamic_temperature(1.0, &cfg) - 0.4679).abs() < 1e-4);
        assert!((dynamic_temperature(1e3, &cfg) - 0.1).abs() < 1e-12);
        let hs: Vec<f64> = (0..50).map(|i| dynamic_temperature(i as f64 * 0.1, &cfg)).collect();
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
    }
}
