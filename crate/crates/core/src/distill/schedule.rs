use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            // The usual 1e-4..0.02 over 1000 steps, rescaled to 100 steps so
            // the last alpha_bar is near zero (about 4e-5).
            steps: 100,
            beta_start: 1e-3,
            beta_end: 0.2,
        }
    }
}

/// Variance schedule; step `t` runs from 1 to `steps()` and indexes
/// `betas[t - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::invalid(format!("beta {b} outside (0, 1)")));
        }
        let mut acc = 1.0;
        let alpha_bars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(NoiseSchedule { betas, alpha_bars })
    }

    /// Betas spaced evenly from `beta_start` to `beta_end`.
    pub fn linear(config: &ScheduleConfig) -> Result<Self> {
        let n = config.steps;
        if n == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        let betas = (0..n)
            .map(|i| {
                if n == 1 {
                    config.beta_start
                } else {
                    config.beta_start
                        + (config.beta_end - config.beta_start) * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        NoiseSchedule::new(betas)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// Variance of the ancestral step from `t` to `t - 1`; zero at `t = 1`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        if t <= 1 {
            return 0.0;
        }
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::invalid(format!(
                "step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}

pub(crate) fn noised(x0: &[f64], eps: &[f64], alpha_bar: f64) -> Vec<f64> {
    let (a, s) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect()
}

/// Samples `q(x_t | x_0)`; returns `(x_t, eps)` with `eps` drawn from
/// `rng::seeded(seed)`.
pub fn forward_noise(
    x0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    schedule.check_step(t)?;
    let mut r = rng::seeded(seed);
    let eps: Vec<f64> = (0..x0.len())
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    Ok((noised(x0, &eps, schedule.alpha_bar(t)), eps))
}
