//! Tile-seam metric.
//!
//! For a boundary between columns `b - 1` and `b`, the seam statistic is the
//! mean absolute first difference across it (over rows and channels). The
//! jump is that value minus the mean of the same statistic one pixel to either
//! side (neighbors that are themselves boundaries are skipped), floored at
//! zero. Rows are handled the same way.

use crate::grid::LatentGrid;
use crate::tiling::TilingPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamMetricReport {
    pub stride: usize,
    pub max_boundary_jump: f64,
    pub mean_boundary_jump: f64,
}

/// Mean |g[.., b] - g[.., b - 1]| for every column offset `b` in `1..W`
/// (index 0 unused).
fn column_differences(grid: &LatentGrid) -> Vec<f64> {
    let (h, w, c) = grid.shape();
    let mut out = vec![0.0; w];
    for (b, slot) in out.iter_mut().enumerate().skip(1) {
        let mut sum = 0.0;
        for r in 0..h {
            for ch in 0..c {
                sum += (grid.get(r, b, ch) - grid.get(r, b - 1, ch)).abs();
            }
        }
        *slot = sum / (h * c) as f64;
    }
    out
}

fn row_differences(grid: &LatentGrid) -> Vec<f64> {
    let (h, w, c) = grid.shape();
    let mut out = vec![0.0; h];
    for (b, slot) in out.iter_mut().enumerate().skip(1) {
        let mut sum = 0.0;
        for col in 0..w {
            for ch in 0..c {
                sum += (grid.get(b, col, ch) - grid.get(b - 1, col, ch)).abs();
            }
        }
        *slot = sum / (w * c) as f64;
    }
    out
}

fn jumps(diffs: &[f64], boundaries: &[usize]) -> Vec<f64> {
    let n = diffs.len();
    boundaries
        .iter()
        .map(|&b| {
            let neighbors: Vec<f64> = [b.checked_sub(1), Some(b + 1)]
                .into_iter()
                .flatten()
                .filter(|&i| i >= 1 && i < n && !boundaries.contains(&i))
                .map(|i| diffs[i])
                .collect();
            let baseline = if neighbors.is_empty() {
                0.0
            } else {
                neighbors.iter().sum::<f64>() / neighbors.len() as f64
            };
            (diffs[b] - baseline).max(0.0)
        })
        .collect()
}

pub fn seam_metrics(grid: &LatentGrid, plan: &TilingPlan) -> SeamMetricReport {
    let mut all = jumps(&column_differences(grid), &plan.col_boundaries());
    all.extend(jumps(&row_differences(grid), &plan.row_boundaries()));
    let (max, mean) = if all.is_empty() {
        (0.0, 0.0)
    } else {
        (
            all.iter().copied().fold(0.0, f64::max),
            all.iter().sum::<f64>() / all.len() as f64,
        )
    };
    SeamMetricReport {
        stride: plan.stride(),
        max_boundary_jump: max,
        mean_boundary_jump: mean,
    }
}
