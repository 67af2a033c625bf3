//! Forward diffusion: linear beta schedules, noising and timestep sampling.
//!
//! Timesteps are 1-based, `t` in `[1, T]`, and index `beta[t - 1]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::LatentGrid;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

/// Choice of the per-timestep gradient weight `omega(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `omega(t) = 1 - alpha_bar[t]`.
    #[default]
    OneMinusAlphaBar,
    /// `omega(t) = 1`.
    Unit,
}

impl Weighting {
    pub fn weight(self, schedule: &DiffusionSchedule, t: usize) -> Result<f64> {
        let alpha_bar = schedule.alpha_bar_at(t)?;
        Ok(match self {
            Weighting::OneMinusAlphaBar => 1.0 - alpha_bar,
            Weighting::Unit => 1.0,
        })
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::OneMinusAlphaBar => "one_minus_alpha_bar",
            Weighting::Unit => "unit",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "one_minus_alpha_bar" => Ok(Weighting::OneMinusAlphaBar),
            "unit" => Ok(Weighting::Unit),
            other => Err(format!(
                "unknown weighting `{other}` (expected one_minus_alpha_bar or unit)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestepSample {
    pub t: usize,
    pub weight: f64,
}

impl TimestepSample {
    pub fn new(t: usize, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "timestep weight {weight} must be finite and >= 0"
            )));
        }
        Ok(TimestepSample { t, weight })
    }
}

impl DiffusionSchedule {
    /// `beta` linearly interpolated from `beta_start` to `beta_end` inclusive.
    pub fn linear(num_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::InvalidSchedule("need at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "require 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let beta = if num_steps == 1 {
            vec![beta_start]
        } else {
            let last = (num_steps - 1) as f64;
            let mut beta: Vec<f64> = (0..num_steps)
                .map(|i| beta_start + (beta_end - beta_start) * (i as f64 / last))
                .collect();
            beta[num_steps - 1] = beta_end;
            beta
        };
        Self::from_betas(beta)
    }

    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidSchedule("need at least one step".into()));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidSchedule(format!("beta {b} outside (0, 1)")));
        }
        let mut alpha_bar = Vec::with_capacity(beta.len());
        let mut acc = 1.0;
        for b in &beta {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        let schedule = DiffusionSchedule { beta, alpha_bar };
        schedule.check_decreasing()?;
        Ok(schedule)
    }

    fn check_decreasing(&self) -> Result<()> {
        if self.alpha_bar[0] >= 1.0 || self.alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSchedule(
                "alpha_bar is not strictly decreasing in f64; betas too small".into(),
            ));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        self.beta.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t >= 1 && t <= self.num_steps() {
            Ok(())
        } else {
            Err(Error::TimestepOutOfRange {
                t,
                min: 1,
                max: self.num_steps(),
            })
        }
    }

    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        self.check_timestep(t)?;
        Ok(self.alpha_bar[t - 1])
    }

    /// `sqrt(alpha_bar[t]) * latent + sqrt(1 - alpha_bar[t]) * noise`.
    pub fn add_noise(
        &self,
        latent: &LatentGrid,
        t: usize,
        noise: &LatentGrid,
    ) -> Result<LatentGrid> {
        let alpha_bar = self.alpha_bar_at(t)?;
        let signal = alpha_bar.sqrt();
        let sigma = (1.0 - alpha_bar).sqrt();
        latent.zip_map(noise, |j, e| signal * j + sigma * e)
    }

    /// Uniform `t` in `[t_min, t_max]` with its weight.
    pub fn sample_timestep(
        &self,
        rng: &mut SplitMix64,
        t_min: usize,
        t_max: usize,
        weighting: Weighting,
    ) -> Result<TimestepSample> {
        if t_min < 1 || t_min > t_max || t_max > self.num_steps() {
            return Err(Error::InvalidParameter(format!(
                "timestep range [{t_min}, {t_max}] is empty or outside [1, {}]",
                self.num_steps()
            )));
        }
        let t = rng.uniform_inclusive(t_min as u64, t_max as u64) as usize;
        TimestepSample::new(t, weighting.weight(self, t)?)
    }

    /// Packs the schedule into a `1 x T x 2` grid of (beta, alpha_bar).
    pub fn to_grid(&self) -> LatentGrid {
        let data = self
            .beta
            .iter()
            .zip(&self.alpha_bar)
            .flat_map(|(b, a)| [*b, *a])
            .collect();
        LatentGrid::from_vec(1, self.num_steps(), 2, data).expect("schedule values are finite")
    }

    pub fn from_grid(grid: &LatentGrid) -> Result<Self> {
        if grid.height() != 1 || grid.channels() != 2 {
            return Err(Error::InvalidSchedule(format!(
                "expected a 1 x T x 2 grid, got {:?}",
                grid.shape()
            )));
        }
        let (beta, alpha_bar): (Vec<f64>, Vec<f64>) = grid
            .as_slice()
            .chunks_exact(2)
            .map(|p| (p[0], p[1]))
            .unzip();
        let mut acc = 1.0;
        for (b, a) in beta.iter().zip(&alpha_bar) {
            if !(*b > 0.0 && *b < 1.0) {
                return Err(Error::InvalidSchedule(format!("beta {b} outside (0, 1)")));
            }
            acc *= 1.0 - b;
            if (acc - a).abs() > 1e-12 {
                return Err(Error::InvalidSchedule(format!(
                    "alpha_bar {a} disagrees with the product of betas ({acc})"
                )));
            }
        }
        let schedule = DiffusionSchedule { beta, alpha_bar };
        schedule.check_decreasing()?;
        Ok(schedule)
    }
}

impl Default for DiffusionSchedule {
    /// `T = 1000`, beta linear from `1e-4` to `2e-2`.
    fn default() -> Self {
        DiffusionSchedule::linear(1000, 1e-4, 2e-2).expect("default schedule is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_schedule() {
        let s = DiffusionSchedule::linear(1, 0.1, 0.1).unwrap();
        assert_eq!(s.betas(), &[0.1]);
        assert_eq!(s.alpha_bars(), &[0.9]);
    }

    #[test]
    fn two_step_schedule() {
        let s = DiffusionSchedule::linear(2, 0.1, 0.3).unwrap();
        assert_eq!(s.betas(), &[0.1, 0.3]);
        assert!((s.alpha_bars()[0] - 0.9).abs() < 1e-15);
        assert!((s.alpha_bars()[1] - 0.63).abs() < 1e-15);
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(DiffusionSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(DiffusionSchedule::linear(10, 0.0, 0.2).is_err());
        assert!(DiffusionSchedule::linear(10, 0.3, 0.2).is_err());
        assert!(DiffusionSchedule::linear(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn noiseless_limit() {
        let s = DiffusionSchedule::linear(10, 1e-15, 1e-15).unwrap();
        let j = SplitMix64::new(1).gaussian_grid(4, 4, 2);
        let e = SplitMix64::new(2).gaussian_grid(4, 4, 2);
        let out = s.add_noise(&j, 5, &e).unwrap();
        assert!(out.max_abs_diff(&j).unwrap() < 1e-6);
    }

    #[test]
    fn zero_latent_gives_scaled_noise() {
        let s = DiffusionSchedule::default();
        let e = SplitMix64::new(2).gaussian_grid(4, 4, 2);
        let out = s.add_noise(&LatentGrid::zeros(4, 4, 2), 300, &e).unwrap();
        let sigma = (1.0 - s.alpha_bar_at(300).unwrap()).sqrt();
        assert_eq!(out, e.scale(sigma));
    }

    #[test]
    fn add_noise_rejects_bad_timestep() {
        let s = DiffusionSchedule::linear(5, 0.1, 0.2).unwrap();
        let g = LatentGrid::zeros(2, 2, 1);
        assert!(matches!(
            s.add_noise(&g, 0, &g),
            Err(Error::TimestepOutOfRange { .. })
        ));
        assert!(s.add_noise(&g, 6, &g).is_err());
    }

    #[test]
    fn degenerate_timestep_range() {
        let s = DiffusionSchedule::default();
        let mut rng = SplitMix64::new(0);
        for _ in 0..20 {
            assert_eq!(
                s.sample_timestep(&mut rng, 5, 5, Weighting::Unit)
                    .unwrap()
                    .t,
                5
            );
        }
        assert!(s.sample_timestep(&mut rng, 6, 5, Weighting::Unit).is_err());
        assert!(s.sample_timestep(&mut rng, 0, 5, Weighting::Unit).is_err());
        assert!(s
            .sample_timestep(&mut rng, 1, 1001, Weighting::Unit)
            .is_err());
    }

    #[test]
    fn weightings() {
        let s = DiffusionSchedule::default();
        let mut rng = SplitMix64::new(0);
        for _ in 0..50 {
            let ts = s
                .sample_timestep(&mut rng, 1, 1000, Weighting::Unit)
                .unwrap();
            assert_eq!(ts.weight, 1.0);
            let w = Weighting::OneMinusAlphaBar.weight(&s, ts.t).unwrap();
            assert_eq!(w, 1.0 - s.alpha_bars()[ts.t - 1]);
        }
        assert_eq!("unit".parse::<Weighting>().unwrap(), Weighting::Unit);
        assert!("cosine".parse::<Weighting>().is_err());
    }

    #[test]
    fn grid_round_trip_is_bit_exact() {
        let s = DiffusionSchedule::default();
        let bytes = s.to_grid().to_golden_bytes();
        let back =
            DiffusionSchedule::from_grid(&LatentGrid::from_golden_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn from_grid_rejects_inconsistent_alpha_bar() {
        let mut g = DiffusionSchedule::linear(3, 0.1, 0.2).unwrap().to_grid();
        g.set(0, 1, 1, 0.5);
        assert!(DiffusionSchedule::from_grid(&g).is_err());
    }
}
