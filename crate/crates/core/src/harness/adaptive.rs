//! Energy-driven step-size selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds and sensitivity of the adaptive rule
/// `τ = max(τ_min, τ_max / √(1 + α E′²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub alpha: f64,
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "adaptive stepping needs 0 < tau_min <= tau_max and alpha > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Adaptive controller holding the two most recent energy samples.
#[derive(Clone, Debug)]
pub struct StepController {
    pub tau_min: f64,
    pub tau_max: f64,
    pub alpha: f64,
    history: Vec<(f64, f64)>,
}

impl StepController {
    pub fn new(cfg: AdaptiveConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            tau_min: cfg.tau_min,
            tau_max: cfg.tau_max,
            alpha: cfg.alpha,
            history: Vec::with_capacity(2),
        })
    }

    /// Records `(t, E)`, keeping the last two samples.
    pub fn record(&mut self, t: f64, energy: f64) {
        if self.history.len() == 2 {
            self.history.remove(0);
        }
        self.history.push((t, energy));
    }

    pub fn history(&self) -> &[(f64, f64)] {
        &self.history
    }

    /// Next step size from the current energy history.
    pub fn next_tau(&self) -> Result<f64> {
        Ok(adaptive_tau(self, estimate_e_prime(&self.history)?))
    }
}

/// `max(τ_min, τ_max / √(1 + α·E′²))`, kept inside `[τ_min, τ_max]`.
pub fn adaptive_tau(c: &StepController, e_prime: f64) -> f64 {
    let raw = c.tau_max / (1.0 + c.alpha * e_prime * e_prime).sqrt();
    if raw.is_nan() {
        return c.tau_min;
    }
    raw.clamp(c.tau_min, c.tau_max)
}

/// Backward difference of the last two `(t, E)` samples; zero with fewer
/// than two samples.
pub fn estimate_e_prime(history: &[(f64, f64)]) -> Result<f64> {
    match history {
        [.., (t0, e0), (t1, e1)] => {
            let dt = t1 - t0;
            if dt == 0.0 {
                return Err(Error::Config("energy samples share a time stamp".into()));
            }
            Ok((e1 - e0) / dt)
        }
        _ => Ok(0.0),
    }
}
