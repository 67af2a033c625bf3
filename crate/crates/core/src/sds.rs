//! Score-distillation gradients built on tiled noise estimation.
//!
//! The latent-space gradient is the closed form `omega(t) * (eps_hat - eps)`.
//! Nothing is differentiated through the estimator; the caller maps the
//! latent gradient to parameter space with a [`Pullback`].

use std::fmt::Write as _;

use crate::diffusion::{DiffusionSchedule, TimestepSample, Weighting};
use crate::error::{Error, Result};
use crate::estimators::NoiseEstimator;
use crate::grid::LatentGrid;
use crate::mne::{consolidate_with, Condition, EstimatorContext, Execution};
use crate::rng::SplitMix64;
use crate::tiling::TilingPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct SdsGradientSample {
    pub grad_latent: LatentGrid,
    pub timestep: TimestepSample,
    /// `||eps_hat - eps||_2`.
    pub residual_norm: f64,
}

/// Linear map from latent gradients to parameter gradients.
pub trait Pullback {
    fn input_shape(&self) -> (usize, usize, usize);
    fn output_len(&self) -> usize;
    fn apply(&self, grad: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityPullback {
    shape: (usize, usize, usize),
}

impl IdentityPullback {
    pub fn new(shape: (usize, usize, usize)) -> Self {
        IdentityPullback { shape }
    }
}

impl Pullback for IdentityPullback {
    fn input_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn output_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    fn apply(&self, grad: &[f64]) -> Vec<f64> {
        grad.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPullback {
    shape: (usize, usize, usize),
    factor: f64,
}

impl ScaledPullback {
    pub fn new(shape: (usize, usize, usize), factor: f64) -> Self {
        ScaledPullback { shape, factor }
    }
}

impl Pullback for ScaledPullback {
    fn input_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn output_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    fn apply(&self, grad: &[f64]) -> Vec<f64> {
        grad.iter().map(|g| g * self.factor).collect()
    }
}

/// Sparse matrix in coordinate form: `out[row] += value * grad[col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePullback {
    shape: (usize, usize, usize),
    output_len: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparsePullback {
    pub fn new(
        shape: (usize, usize, usize),
        output_len: usize,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let input_len = shape.0 * shape.1 * shape.2;
        if let Some(&(r, c, v)) = entries
            .iter()
            .find(|(r, c, v)| *r >= output_len || *c >= input_len || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "sparse entry ({r}, {c}, {v}) outside {output_len}x{input_len} or non-finite"
            )));
        }
        Ok(SparsePullback {
            shape,
            output_len,
            entries,
        })
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

impl Pullback for SparsePullback {
    fn input_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn apply(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len];
        for &(r, c, v) in &self.entries {
            out[r] += v * grad[c];
        }
        out
    }
}

pub fn apply_pullback(sample: &SdsGradientSample, pb: &dyn Pullback) -> Result<Vec<f64>> {
    if pb.input_shape() != sample.grad_latent.shape() {
        return Err(Error::ShapeMismatch {
            expected: pb.input_shape(),
            actual: sample.grad_latent.shape(),
        });
    }
    Ok(pb.apply(sample.grad_latent.as_slice()))
}

/// Estimator, tiling and schedule bundled for repeated gradient draws.
pub struct Distiller<'a> {
    pub estimator: &'a dyn NoiseEstimator,
    pub plan: &'a TilingPlan,
    pub schedule: &'a DiffusionSchedule,
    pub condition: Condition,
    pub execution: Execution,
}

impl<'a> Distiller<'a> {
    pub fn new(
        estimator: &'a dyn NoiseEstimator,
        plan: &'a TilingPlan,
        schedule: &'a DiffusionSchedule,
    ) -> Self {
        Distiller {
            estimator,
            plan,
            schedule,
            condition: Condition::default(),
            execution: Execution::default(),
        }
    }

    /// One gradient sample. Draws `eps` from `rng` in row-major order, noises
    /// the latent to `ts.t`, consolidates the tiled estimate and returns
    /// `ts.weight * (eps_hat - eps)`.
    pub fn step(
        &self,
        latent: &LatentGrid,
        ts: TimestepSample,
        rng: &mut SplitMix64,
    ) -> Result<SdsGradientSample> {
        let (h, w, c) = latent.shape();
        let noise = rng.gaussian_grid(h, w, c);
        self.step_with_noise(latent, ts, &noise)
    }

    pub fn step_with_noise(
        &self,
        latent: &LatentGrid,
        ts: TimestepSample,
        noise: &LatentGrid,
    ) -> Result<SdsGradientSample> {
        let noisy = self.schedule.add_noise(latent, ts.t, noise)?;
        let ctx = EstimatorContext::new(ts.t, self.condition.clone(), self.schedule)?;
        let eps_hat = consolidate_with(&noisy, self.estimator, self.plan, &ctx, self.execution)?;
        let residual = eps_hat.sub(noise)?;
        Ok(SdsGradientSample {
            grad_latent: residual.scale(ts.weight),
            timestep: ts,
            residual_norm: residual.norm_l2(),
        })
    }

    /// Gradient descent on a latent treated directly as the parameters
    /// (identity pullback). Each step draws the timestep first and then the
    /// noise from a single stream seeded with `config.seed`.
    pub fn optimize(&self, params: &LatentGrid, config: &OptimizeConfig) -> Result<Trace> {
        config.validate(self.schedule)?;
        if let Some(target) = &config.target {
            if target.shape() != params.shape() {
                return Err(Error::ShapeMismatch {
                    expected: params.shape(),
                    actual: target.shape(),
                });
            }
        }
        let target_error = |theta: &LatentGrid| -> Option<f64> {
            config
                .target
                .as_ref()
                .map(|m| theta.max_abs_diff(m).expect("shape checked"))
        };
        let pullback = IdentityPullback::new(params.shape());
        let mut rng = SplitMix64::new(config.seed);
        let mut theta = params.clone();
        let initial_target_error = target_error(&theta);
        let mut rows = Vec::with_capacity(config.steps);

        for step in 1..=config.steps {
            let ts = self.schedule.sample_timestep(
                &mut rng,
                config.t_min,
                config.t_max,
                config.weighting,
            )?;
            let sample = self.step(&theta, ts, &mut rng)?;
            let grad = apply_pullback(&sample, &pullback)?;
            let updated: Vec<f64> = theta
                .as_slice()
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - config.lr * g)
                .collect();
            let (h, w, c) = theta.shape();
            theta = LatentGrid::from_vec(h, w, c, updated)?;
            rows.push(TraceRow {
                step,
                t: ts.t,
                omega: ts.weight,
                residual_norm: sample.residual_norm,
                target_error: target_error(&theta),
            });
        }

        Ok(Trace {
            initial_target_error,
            rows,
            final_params: theta,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub steps: usize,
    pub lr: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub weighting: Weighting,
    pub seed: u64,
    pub target: Option<LatentGrid>,
}

impl OptimizeConfig {
    fn validate(&self, schedule: &DiffusionSchedule) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.t_min < 1 || self.t_min > self.t_max || self.t_max > schedule.num_steps() {
            return Err(Error::InvalidParameter(format!(
                "timestep range [{}, {}] invalid for T = {}",
                self.t_min,
                self.t_max,
                schedule.num_steps()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub t: usize,
    pub omega: f64,
    pub residual_norm: f64,
    pub target_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial_target_error: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub final_params: LatentGrid,
}

pub const TRACE_CSV_HEADER: &str = "step,t,omega,residual_norm,target_error";

impl Trace {
    pub fn final_target_error(&self) -> Option<f64> {
        self.rows
            .last()
            .map_or(self.initial_target_error, |row| row.target_error)
    }

    /// Header row, then one row per step. Floats use Rust's shortest
    /// round-trip formatting; a missing target error is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let target = row.target_error.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.step, row.t, row.omega, row.residual_norm, target
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ConstantEstimator, GaussianPriorEstimator};

    #[test]
    fn zero_weight_gives_zero_gradient() {
        let s = DiffusionSchedule::default();
        let est = ConstantEstimator::new(5.0).unwrap();
        let plan = TilingPlan::new(8, 8, 4, 2).unwrap();
        let d = Distiller::new(&est, &plan, &s);
        let latent = SplitMix64::new(1).gaussian_grid(8, 8, 2);
        let ts = TimestepSample::new(100, 0.0).unwrap();
        let sample = d.step(&latent, ts, &mut SplitMix64::new(2)).unwrap();
        assert!(sample.grad_latent.as_slice().iter().all(|g| *g == 0.0));
        assert!(sample.residual_norm > 0.0);
    }

    #[test]
    fn gaussian_single_tile_matches_closed_form() {
        let s = DiffusionSchedule::default();
        let m = 0.4;
        let est = GaussianPriorEstimator::new(m, s.clone()).unwrap();
        let plan = TilingPlan::single(8).unwrap();
        let d = Distiller::new(&est, &plan, &s);
        let latent = SplitMix64::new(11).gaussian_grid(8, 8, 3);
        let t = 640;
        let ts = TimestepSample::new(t, 0.75).unwrap();
        let sample = d.step(&latent, ts, &mut SplitMix64::new(12)).unwrap();

        let eps = SplitMix64::new(12).gaussian_grid(8, 8, 3);
        let ab = s.alpha_bars()[t - 1];
        for i in 0..latent.len() {
            let j = latent.as_slice()[i];
            let e = eps.as_slice()[i];
            let jt = ab.sqrt() * j + (1.0 - ab).sqrt() * e;
            let want = 0.75 * ((jt - ab.sqrt() * m) / (1.0 - ab).sqrt() - e);
            assert!((sample.grad_latent.as_slice()[i] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn pullbacks() {
        let g = LatentGrid::from_vec(1, 2, 2, vec![1.0, -2.0, 0.5, 4.0]).unwrap();
        let sample = SdsGradientSample {
            grad_latent: g.clone(),
            timestep: TimestepSample::new(1, 1.0).unwrap(),
            residual_norm: 0.0,
        };
        assert_eq!(
            apply_pullback(&sample, &IdentityPullback::new((1, 2, 2))).unwrap(),
            g.as_slice()
        );
        assert_eq!(
            apply_pullback(&sample, &ScaledPullback::new((1, 2, 2), 2.0)).unwrap(),
            vec![2.0, -4.0, 1.0, 8.0]
        );
        assert!(apply_pullback(&sample, &IdentityPullback::new((2, 2, 1))).is_err());
        let sparse =
            SparsePullback::new((1, 2, 2), 2, vec![(0, 0, 1.0), (0, 3, 0.5), (1, 1, -1.0)])
                .unwrap();
        assert_eq!(apply_pullback(&sample, &sparse).unwrap(), vec![3.0, 2.0]);
        assert!(SparsePullback::new((1, 2, 2), 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn zero_steps_leaves_params_unchanged() {
        let s = DiffusionSchedule::default();
        let est = GaussianPriorEstimator::new(0.7, s.clone()).unwrap();
        let plan = TilingPlan::single(8).unwrap();
        let d = Distiller::new(&est, &plan, &s);
        let theta = LatentGrid::zeros(8, 8, 1);
        let config = OptimizeConfig {
            steps: 0,
            lr: 0.01,
            t_min: 20,
            t_max: 980,
            weighting: Weighting::Unit,
            seed: 42,
            target: Some(LatentGrid::filled(8, 8, 1, 0.7)),
        };
        let trace = d.optimize(&theta, &config).unwrap();
        assert_eq!(trace.final_params, theta);
        assert_eq!(trace.final_target_error(), trace.initial_target_error);
        assert_eq!(trace.to_csv(), format!("{TRACE_CSV_HEADER}\n"));
    }

    #[test]
    fn optimize_rejects_bad_config() {
        let s = DiffusionSchedule::default();
        let est = ConstantEstimator::new(0.0).unwrap();
        let plan = TilingPlan::single(4).unwrap();
        let d = Distiller::new(&est, &plan, &s);
        let theta = LatentGrid::zeros(4, 4, 1);
        let mut config = OptimizeConfig {
            steps: 1,
            lr: 0.0,
            t_min: 1,
            t_max: 10,
            weighting: Weighting::Unit,
            seed: 0,
            target: None,
        };
        assert!(d.optimize(&theta, &config).is_err());
        config.lr = 0.1;
        config.t_max = 1001;
        assert!(d.optimize(&theta, &config).is_err());
        config.t_max = 10;
        config.target = Some(LatentGrid::zeros(2, 2, 1));
        assert!(d.optimize(&theta, &config).is_err());
    }
}
