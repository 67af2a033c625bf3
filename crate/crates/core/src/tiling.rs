//! Sliding-window tiling plans.
//!
//! Candidate offsets along each axis are `0, s, 2s, ...`. Any candidate whose
//! window would run past the edge is replaced by the clamped offset
//! `dim - k`, and duplicates are dropped. Tiles are emitted in row-major order
//! of their top-left corners.

use crate::error::{Error, Result};
use crate::grid::{LatentGrid, Region};

pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingPlan {
    grid_height: usize,
    grid_width: usize,
    window: usize,
    stride: usize,
    tiles: Vec<Region>,
}

fn axis_offsets(dim: usize, window: usize, stride: usize) -> Vec<usize> {
    let last = dim - window;
    let mut offsets = Vec::new();
    let mut p = 0;
    loop {
        let clamped = p.min(last);
        if offsets.last() != Some(&clamped) {
            offsets.push(clamped);
        }
        if p >= last {
            break;
        }
        p += stride;
    }
    offsets
}

fn axis_covered(offsets: &[usize], dim: usize, window: usize) -> bool {
    let mut reach = 0;
    for &o in offsets {
        if o > reach {
            return false;
        }
        reach = reach.max(o + window);
    }
    reach >= dim
}

impl TilingPlan {
    pub fn new(height: usize, width: usize, window: usize, stride: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidPlan(format!("empty grid {height}x{width}")));
        }
        if window == 0 || window > height.min(width) {
            return Err(Error::InvalidPlan(format!(
                "window {window} does not fit grid {height}x{width}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidPlan("stride must be at least 1".into()));
        }
        let rows = axis_offsets(height, window, stride);
        let cols = axis_offsets(width, window, stride);
        if !axis_covered(&rows, height, window) || !axis_covered(&cols, width, window) {
            return Err(Error::InvalidPlan(format!(
                "stride {stride} with window {window} leaves uncovered pixels in {height}x{width}"
            )));
        }
        let tiles = rows
            .iter()
            .flat_map(|&top| cols.iter().map(move |&left| Region::new(top, left, window)))
            .collect();
        Ok(TilingPlan {
            grid_height: height,
            grid_width: width,
            window,
            stride,
            tiles,
        })
    }

    /// Plan whose single window is the whole (square) grid.
    pub fn single(side: usize) -> Result<Self> {
        Self::new(side, side, side, side)
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn tiles(&self) -> &[Region] {
        &self.tiles
    }

    pub fn tile(&self, m: usize) -> Option<Region> {
        self.tiles.get(m).copied()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn matches(&self, grid: &LatentGrid) -> bool {
        grid.height() == self.grid_height && grid.width() == self.grid_width
    }

    /// Row offsets at which a tile edge falls strictly inside the grid.
    pub fn row_boundaries(&self) -> Vec<usize> {
        edges(
            self.tiles.iter().map(|t| (t.top, t.bottom())),
            self.grid_height,
        )
    }

    pub fn col_boundaries(&self) -> Vec<usize> {
        edges(
            self.tiles.iter().map(|t| (t.left, t.right())),
            self.grid_width,
        )
    }
}

fn edges(spans: impl Iterator<Item = (usize, usize)>, dim: usize) -> Vec<usize> {
    let mut out: Vec<usize> = spans
        .flat_map(|(a, b)| [a, b])
        .filter(|&e| e > 0 && e < dim)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
