//! Tiled score-distillation gradients.
//!
//! A latent larger than the estimator's native window is covered by
//! overlapping square tiles. Each tile is estimated independently and the
//! per-pixel estimates are averaged over every tile covering that pixel. The
//! consolidated noise estimate feeds a score-distillation gradient, and a
//! small sphere-tracing renderer provides the shading used by the demos.

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod mne;
pub mod render;
pub mod rng;
pub mod sds;
pub mod tiling;

pub use diffusion::{DiffusionSchedule, TimestepSample, Weighting};
pub use error::{Error, Result};
pub use estimators::{
    BoxBlurEstimator, ConstantEstimator, GaussianPriorEstimator, IdentityEstimator, NoiseEstimator,
    SpyEstimator,
};
pub use grid::{LatentGrid, Region};
pub use mne::{consolidate, consolidate_with, Condition, EstimatorContext, Execution};
pub use rng::SplitMix64;
pub use sds::{Distiller, OptimizeConfig, Pullback, SdsGradientSample};
pub use tiling::TilingPlan;
