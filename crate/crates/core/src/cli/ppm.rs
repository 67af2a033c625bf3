//! Binary PPM (P6) output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::LatentGrid;

/// `[0, 1]` to a byte, rounding half up: `floor(v * 255 + 0.5)`.
pub fn to_byte(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor() as u8
}

pub fn encode_ppm(image: &LatentGrid) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::InvalidParameter(format!(
            "PPM needs 3 channels, image has {}",
            image.channels()
        )));
    }
    if let Some(v) = image.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "pixel value {v} outside [0, 1]"
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_slice().iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn write_ppm(image: &LatentGrid, path: &Path) -> Result<()> {
    let bytes = encode_ppm(image)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// How a latent channel is mapped into `[0, 1]` for viewing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Linear stretch of the channel's min..max; a flat channel becomes 0.5.
    MinMax,
    /// Values clamped into `[0, 1]` unchanged.
    Clamp,
}

/// One latent channel as a gray three-channel image.
pub fn channel_image(
    grid: &LatentGrid,
    channel: usize,
    normalization: Normalization,
) -> Result<LatentGrid> {
    if channel >= grid.channels() {
        return Err(Error::InvalidParameter(format!(
            "channel {channel} out of range for {} channels",
            grid.channels()
        )));
    }
    let values: Vec<f64> = grid
        .as_slice()
        .iter()
        .skip(channel)
        .step_by(grid.channels())
        .copied()
        .collect();
    let map: Box<dyn Fn(f64) -> f64> = match normalization {
        Normalization::Clamp => Box::new(|v: f64| v.clamp(0.0, 1.0)),
        Normalization::MinMax => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                Box::new(move |v: f64| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            } else {
                Box::new(|_| 0.5)
            }
        }
    };
    let data = values.iter().flat_map(|&v| [map(v); 3]).collect();
    LatentGrid::from_vec(grid.height(), grid.width(), 3, data)
}
