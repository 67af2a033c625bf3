//! Noise estimators.
//!
//! An estimator sees one tile plus the timestep and condition, never its
//! position in the full grid. Pointwise estimators therefore tile exactly,
//! while estimators with a spatial receptive field produce seams at tile
//! edges.

use std::sync::Mutex;

use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::grid::LatentGrid;
use crate::mne::EstimatorContext;

pub trait NoiseEstimator: Send + Sync {
    /// Returns a noise estimate with the same shape as `tile`.
    fn estimate(&self, tile: &LatentGrid, ctx: &EstimatorContext) -> Result<LatentGrid>;

    /// Name and parameters, for logs and run manifests.
    fn descriptor(&self) -> String;
}

impl<E: NoiseEstimator + ?Sized> NoiseEstimator for Box<E> {
    fn estimate(&self, tile: &LatentGrid, ctx: &EstimatorContext) -> Result<LatentGrid> {
        (**self).estimate(tile, ctx)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimator {
    value: f64,
}

impl ConstantEstimator {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "constant {value} is not finite"
            )));
        }
        Ok(ConstantEstimator { value })
    }
}

impl NoiseEstimator for ConstantEstimator {
    fn estimate(&self, tile: &LatentGrid, _ctx: &EstimatorContext) -> Result<LatentGrid> {
        let (h, w, c) = tile.shape();
        Ok(LatentGrid::filled(h, w, c, self.value))
    }

    fn descriptor(&self) -> String {
        format!("constant(c={})", self.value)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEstimator;

impl NoiseEstimator for IdentityEstimator {
    fn estimate(&self, tile: &LatentGrid, _ctx: &EstimatorContext) -> Result<LatentGrid> {
        Ok(tile.clone())
    }

    fn descriptor(&self) -> String {
        "identity".into()
    }
}

/// Exact denoiser for latents drawn from `N(m, I)` with a spatially uniform
/// mean `m`: `eps_hat(x_t, t) = (x_t - sqrt(alpha_bar_t) m) / sqrt(1 - alpha_bar_t)`.
#[derive(Debug, Clone)]
pub struct GaussianPriorEstimator {
    mean: f64,
    schedule: DiffusionSchedule,
}

impl GaussianPriorEstimator {
    pub fn new(mean: f64, schedule: DiffusionSchedule) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prior mean {mean} is not finite"
            )));
        }
        Ok(GaussianPriorEstimator { mean, schedule })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl NoiseEstimator for GaussianPriorEstimator {
    fn estimate(&self, tile: &LatentGrid, ctx: &EstimatorContext) -> Result<LatentGrid> {
        let alpha_bar = self.schedule.alpha_bar_at(ctx.timestep())?;
        let offset = alpha_bar.sqrt() * self.mean;
        let sigma = (1.0 - alpha_bar).sqrt();
        Ok(tile.map(|x| (x - offset) / sigma))
    }

    fn descriptor(&self) -> String {
        format!("gaussian_prior(mean={})", self.mean)
    }
}

/// Per-channel `(2r + 1) x (2r + 1)` box blur with clamp-to-edge sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxBlurEstimator {
    radius: usize,
}

impl BoxBlurEstimator {
    pub fn new(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidParameter(
                "blur radius must be at least 1".into(),
            ));
        }
        Ok(BoxBlurEstimator { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn diameter(&self) -> usize {
        2 * self.radius + 1
    }

    /// Blurs a grid of any size; used as the full-grid reference.
    pub fn blur(&self, grid: &LatentGrid) -> LatentGrid {
        let (h, w, c) = grid.shape();
        let r = self.radius as isize;
        let norm = 1.0 / self.diameter() as f64;
        let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

        let mut horizontal = LatentGrid::zeros(h, w, c);
        for row in 0..h {
            for col in 0..w {
                for ch in 0..c {
                    let sum: f64 = (-r..=r)
                        .map(|d| grid.get(row, clamp(col as isize + d, w), ch))
                        .sum();
                    horizontal.set(row, col, ch, sum * norm);
                }
            }
        }
        let mut out = LatentGrid::zeros(h, w, c);
        for row in 0..h {
            for col in 0..w {
                for ch in 0..c {
                    let sum: f64 = (-r..=r)
                        .map(|d| horizontal.get(clamp(row as isize + d, h), col, ch))
                        .sum();
                    out.set(row, col, ch, sum * norm);
                }
            }
        }
        out
    }
}

impl NoiseEstimator for BoxBlurEstimator {
    fn estimate(&self, tile: &LatentGrid, _ctx: &EstimatorContext) -> Result<LatentGrid> {
        let side = tile.height().min(tile.width());
        if self.diameter() > side {
            return Err(Error::InvalidParameter(format!(
                "blur diameter {} exceeds tile side {side}",
                self.diameter()
            )));
        }
        Ok(self.blur(tile))
    }

    fn descriptor(&self) -> String {
        format!("box_blur(radius={})", self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallRecord {
    pub shape: (usize, usize, usize),
    /// FNV-1a hash over the bit patterns of the tile values.
    pub fingerprint: u64,
}

pub fn fingerprint(grid: &LatentGrid) -> u64 {
    grid.as_slice().iter().fold(0xcbf2_9ce4_8422_2325, |h, v| {
        v.to_bits()
            .to_le_bytes()
            .iter()
            .fold(h, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
    })
}

/// Delegates to `inner` and logs every call.
#[derive(Debug)]
pub struct SpyEstimator<E> {
    inner: E,
    log: Mutex<Vec<CallRecord>>,
}

impl<E: NoiseEstimator> SpyEstimator<E> {
    pub fn new(inner: E) -> Self {
        SpyEstimator {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Calls in the order they arrived.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap().clear();
    }
}

impl<E: NoiseEstimator> NoiseEstimator for SpyEstimator<E> {
    fn estimate(&self, tile: &LatentGrid, ctx: &EstimatorContext) -> Result<LatentGrid> {
        let record = CallRecord {
            shape: tile.shape(),
            fingerprint: fingerprint(tile),
        };
        self.log.lock().unwrap().push(record);
        self.inner.estimate(tile, ctx)
    }

    fn descriptor(&self) -> String {
        format!("spy({})", self.inner.descriptor())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mne::Condition;
    use crate::rng::SplitMix64;

    fn ctx(t: usize) -> EstimatorContext {
        EstimatorContext::new(t, Condition::default(), &DiffusionSchedule::default()).unwrap()
    }

    #[test]
    fn constant_zero() {
        let tile = SplitMix64::new(1).gaussian_grid(5, 5, 3);
        let out = ConstantEstimator::new(0.0)
            .unwrap()
            .estimate(&tile, &ctx(10))
            .unwrap();
        assert_eq!(out, LatentGrid::zeros(5, 5, 3));
        assert!(ConstantEstimator::new(f64::INFINITY).is_err());
    }

    #[test]
    fn gaussian_prior_zero_at_scaled_mean() {
        let s = DiffusionSchedule::default();
        let est = GaussianPriorEstimator::new(0.7, s.clone()).unwrap();
        let t = 400;
        let x = LatentGrid::filled(4, 4, 2, s.alpha_bar_at(t).unwrap().sqrt() * 0.7);
        assert_eq!(
            est.estimate(&x, &ctx(t)).unwrap(),
            LatentGrid::zeros(4, 4, 2)
        );
    }

    #[test]
    fn gaussian_prior_zero_mean_reduces() {
        let s = DiffusionSchedule::default();
        let est = GaussianPriorEstimator::new(0.0, s.clone()).unwrap();
        let x = SplitMix64::new(5).gaussian_grid(4, 4, 2);
        let sigma = (1.0 - s.alpha_bar_at(250).unwrap()).sqrt();
        let out = est.estimate(&x, &ctx(250)).unwrap();
        assert_eq!(out, x.map(|v| v / sigma));
    }

    #[test]
    fn gaussian_prior_denoiser_identity() {
        let s = DiffusionSchedule::default();
        let m = -0.3;
        let est = GaussianPriorEstimator::new(m, s.clone()).unwrap();
        let x = SplitMix64::new(6).gaussian_grid(6, 6, 2);
        for t in [1, 17, 500, 1000] {
            let ab = s.alpha_bar_at(t).unwrap();
            let eps = est.estimate(&x, &ctx(t)).unwrap();
            let recovered = x.zip_map(&eps, |xt, e| xt - (1.0 - ab).sqrt() * e).unwrap();
            for v in recovered.as_slice() {
                assert!((v - ab.sqrt() * m).abs() <= 1e-12, "t={t}: {v}");
            }
        }
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let est = BoxBlurEstimator::new(2).unwrap();
        let out = est
            .estimate(&LatentGrid::filled(8, 8, 2, 1.5), &ctx(1))
            .unwrap();
        for v in out.as_slice() {
            assert!((v - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn blur_spreads_impulse() {
        let mut g = LatentGrid::zeros(7, 7, 1);
        g.set(3, 3, 0, 1.0);
        let out = BoxBlurEstimator::new(1)
            .unwrap()
            .estimate(&g, &ctx(1))
            .unwrap();
        for r in 0..7 {
            for c in 0..7 {
                let want = if (2..=4).contains(&r) && (2..=4).contains(&c) {
                    1.0 / 9.0
                } else {
                    0.0
                };
                assert!((out.get(r, c, 0) - want).abs() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn blur_radius_limits() {
        assert!(BoxBlurEstimator::new(0).is_err());
        let est = BoxBlurEstimator::new(3).unwrap();
        assert!(est.estimate(&LatentGrid::zeros(6, 6, 1), &ctx(1)).is_err());
        assert!(est.estimate(&LatentGrid::zeros(7, 7, 1), &ctx(1)).is_ok());
    }

    #[test]
    fn spy_records_shapes_in_order() {
        let spy = SpyEstimator::new(IdentityEstimator);
        let a = LatentGrid::zeros(2, 2, 1);
        let b = LatentGrid::filled(3, 3, 2, 1.0);
        spy.estimate(&a, &ctx(1)).unwrap();
        spy.estimate(&b, &ctx(1)).unwrap();
        let calls = spy.calls();
        assert_eq!(calls.len(), 2);
        assert_eq!(calls[0].shape, (2, 2, 1));
        assert_eq!(
            calls[1],
            CallRecord {
                shape: (3, 3, 2),
                fingerprint: fingerprint(&b)
            }
        );
        assert_eq!(spy.descriptor(), "spy(identity)");
    }
}
