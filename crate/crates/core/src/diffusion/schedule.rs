use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance schedule of the forward noising chain. Timesteps are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// Serializable schedule parameters (linear beta ramp).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 200,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::linear(self.timesteps, self.beta_start, self.beta_end)
    }
}

impl DiffusionSchedule {
    /// Linear ramp from `beta_start` to `beta_end`, both inclusive.
    pub fn linear(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::Schedule("at least one timestep is required".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Schedule(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let betas = if timesteps == 1 {
            vec![beta_start]
        } else {
            let step = (beta_end - beta_start) / (timesteps - 1) as f64;
            (0..timesteps)
                .map(|i| beta_start + step * i as f64)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Schedule("at least one timestep is required".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Schedule(format!("beta {b} outside (0, 1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    pub fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::Timestep {
                t,
                max: self.timesteps(),
            });
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// Cumulative product of alphas; `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_step_products() {
        let s = DiffusionSchedule::from_betas(vec![0.1, 0.2, 0.5]).unwrap();
        let expect_alpha = [0.9, 0.8, 0.5];
        let expect_bar = [0.9, 0.72, 0.36];
        for t in 1..=3 {
            assert!((s.alpha(t) - expect_alpha[t - 1]).abs() < 1e-15);
            assert!((s.alpha_bar(t) - expect_bar[t - 1]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step() {
        let s = DiffusionSchedule::linear(1, 0.3, 0.5).unwrap();
        assert_eq!(s.betas(), &[0.3]);
        assert!((s.alpha_bar(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn linear_endpoints_inclusive() {
        let s = ScheduleConfig::default().build().unwrap();
        assert_eq!(s.timesteps(), 200);
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(200) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid() {
        assert!(DiffusionSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(DiffusionSchedule::linear(5, 0.0, 0.2).is_err());
        assert!(DiffusionSchedule::linear(5, 0.3, 0.2).is_err());
        assert!(DiffusionSchedule::linear(5, 0.1, 1.0).is_err());
        let s = DiffusionSchedule::linear(5, 0.1, 0.2).unwrap();
        assert!(s.check(0).is_err() && s.check(6).is_err() && s.check(5).is_ok());
    }

    proptest! {
        #[test]
        fn alpha_bar_strictly_decreasing(t in 1usize..400, b0 in 1e-5f64..0.5, extra in 0.0f64..0.4) {
            let s = DiffusionSchedule::linear(t, b0, (b0 + extra).min(0.6)).unwrap();
            prop_assert!(s.alpha_bar(1) < 1.0);
            for i in 2..=t {
                prop_assert!(s.alpha_bar(i) < s.alpha_bar(i - 1));
            }
        }
    }
}
