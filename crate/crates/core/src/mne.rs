//! Multiple noise estimation.
//!
//! The noisy latent is cut into the tiles of a [`TilingPlan`]; each tile is
//! handed to the estimator on its own and the estimates are pasted back into
//! an accumulator `xi` while a weight map `w` counts how many tiles touched
//! each pixel. The consolidated estimate is `xi / w`, the per-pixel mean over
//! covering tiles.
//!
//! Tile estimates may be computed concurrently, but they are always committed
//! to the accumulator in plan order, so results do not depend on scheduling.

use rayon::prelude::*;

use crate::diffusion::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::estimators::NoiseEstimator;
use crate::grid::LatentGrid;
use crate::tiling::TilingPlan;

/// Opaque conditioning token (prompt, guidance id). Shared by all tiles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Condition(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorContext {
    timestep: usize,
    condition: Condition,
}

impl EstimatorContext {
    pub fn new(
        timestep: usize,
        condition: Condition,
        schedule: &DiffusionSchedule,
    ) -> Result<Self> {
        schedule.check_timestep(timestep)?;
        Ok(EstimatorContext {
            timestep,
            condition,
        })
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub xi: LatentGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub w: LatentGrid,
}

impl Accumulator {
    pub fn zeros_like(grid: &LatentGrid) -> Self {
        let (h, w, c) = grid.shape();
        Accumulator {
            xi: LatentGrid::zeros(h, w, c),
        }
    }
}

impl WeightMap {
    pub fn zeros_like(grid: &LatentGrid) -> Self {
        let (h, w, c) = grid.shape();
        WeightMap {
            w: LatentGrid::zeros(h, w, c),
        }
    }
}

/// How tile estimates are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// At most `in_flight` tile estimates are alive at once.
    Parallel {
        in_flight: usize,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel {
            in_flight: rayon::current_num_threads().max(1),
        }
    }
}

fn check_plan(noisy: &LatentGrid, plan: &TilingPlan) -> Result<()> {
    if plan.matches(noisy) {
        Ok(())
    } else {
        Err(Error::InvalidPlan(format!(
            "plan is for {}x{} but the latent is {}x{}",
            plan.grid_height(),
            plan.grid_width(),
            noisy.height(),
            noisy.width()
        )))
    }
}

/// Runs the estimator on tile `m` (0-based) of `noisy`.
///
/// The estimator only ever sees a `k x k x C` crop.
pub fn estimate_tile(
    estimator: &dyn NoiseEstimator,
    noisy: &LatentGrid,
    plan: &TilingPlan,
    m: usize,
    ctx: &EstimatorContext,
) -> Result<LatentGrid> {
    check_plan(noisy, plan)?;
    let region = plan.tile(m).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "tile index {m} out of range for {} tiles",
            plan.tile_count()
        ))
    })?;
    let tile = noisy.crop(region)?;
    let wrap = |source: Error| Error::Estimator {
        tile: m,
        source: Box::new(source),
    };
    let estimate = estimator.estimate(&tile, ctx).map_err(wrap)?;
    if estimate.shape() != tile.shape() {
        return Err(wrap(Error::ShapeMismatch {
            expected: tile.shape(),
            actual: estimate.shape(),
        }));
    }
    Ok(estimate)
}

/// Adds `estimate` into `xi` over tile `m` and bumps the weight map there by one.
pub fn accumulate(
    acc: &mut Accumulator,
    wmap: &mut WeightMap,
    plan: &TilingPlan,
    m: usize,
    estimate: &LatentGrid,
) -> Result<()> {
    if acc.xi.shape() != wmap.w.shape() {
        return Err(Error::ShapeMismatch {
            expected: acc.xi.shape(),
            actual: wmap.w.shape(),
        });
    }
    check_plan(&acc.xi, plan)?;
    let region = plan.tile(m).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "tile index {m} out of range for {} tiles",
            plan.tile_count()
        ))
    })?;
    acc.xi.paste_add(region, estimate)?;
    wmap.w.region_add_scalar(region, 1.0)
}

/// Consolidated noise estimate with the default (parallel) execution.
pub fn consolidate(
    noisy: &LatentGrid,
    estimator: &dyn NoiseEstimator,
    plan: &TilingPlan,
    ctx: &EstimatorContext,
) -> Result<LatentGrid> {
    consolidate_with(noisy, estimator, plan, ctx, Execution::default())
}

pub fn consolidate_with(
    noisy: &LatentGrid,
    estimator: &dyn NoiseEstimator,
    plan: &TilingPlan,
    ctx: &EstimatorContext,
    execution: Execution,
) -> Result<LatentGrid> {
    let order: Vec<usize> = (0..plan.tile_count()).collect();
    consolidate_in_order(noisy, estimator, plan, ctx, execution, &order)
}

/// Like [`consolidate_with`] but commits tiles in the given order.
///
/// The canonical order is `0..M`; other permutations exist for testing that
/// the result does not depend on it beyond rounding.
pub fn consolidate_in_order(
    noisy: &LatentGrid,
    estimator: &dyn NoiseEstimator,
    plan: &TilingPlan,
    ctx: &EstimatorContext,
    execution: Execution,
    order: &[usize],
) -> Result<LatentGrid> {
    check_plan(noisy, plan)?;
    let mut acc = Accumulator::zeros_like(noisy);
    let mut wmap = WeightMap::zeros_like(noisy);

    match execution {
        Execution::Sequential => {
            for &m in order {
                let estimate = estimate_tile(estimator, noisy, plan, m, ctx)?;
                accumulate(&mut acc, &mut wmap, plan, m, &estimate)?;
            }
        }
        Execution::Parallel { in_flight } => {
            for batch in order.chunks(in_flight.max(1)) {
                let estimates: Vec<LatentGrid> = batch
                    .par_iter()
                    .map(|&m| estimate_tile(estimator, noisy, plan, m, ctx))
                    .collect::<Result<_>>()?;
                for (&m, estimate) in batch.iter().zip(&estimates) {
                    accumulate(&mut acc, &mut wmap, plan, m, estimate)?;
                }
            }
        }
    }

    let estimate = acc.xi.elementwise_div(&wmap.w)?;
    if estimate.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "consolidated estimate is not finite".into(),
        ));
    }
    Ok(estimate)
}

/// Weight map after a full pass over `plan` (the per-pixel coverage count).
pub fn coverage_weights(plan: &TilingPlan, channels: usize) -> Result<WeightMap> {
    let mut wmap = WeightMap {
        w: LatentGrid::zeros(plan.grid_height(), plan.grid_width(), channels),
    };
    for region in plan.tiles() {
        wmap.w.region_add_scalar(*region, 1.0)?;
    }
    Ok(wmap)
}
