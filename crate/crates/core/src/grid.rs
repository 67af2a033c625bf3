//! Dense `H x W x C` grids of `f64` stored row-major as (row, column, channel).
//!
//! Every latent quantity (clean latent, noisy latent, noise, accumulators and
//! the consolidated estimate) lives in a [`LatentGrid`]. Images produced by the
//! renderer reuse the same type with three channels.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

/// A square window given by its top-left corner and side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

impl Region {
    pub fn new(top: usize, left: usize, size: usize) -> Self {
        Region { top, left, size }
    }

    /// Center as `(row, column)`; half-integral for even sizes.
    pub fn center(&self) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (self.top as f64 + half, self.left as f64 + half)
    }

    pub fn bottom(&self) -> usize {
        self.top + self.size
    }

    pub fn right(&self) -> usize {
        self.left + self.size
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.bottom() && col >= self.left && col < self.right()
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.size > 0 && self.bottom() <= height && self.right() <= width
    }
}

impl LatentGrid {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(
            height > 0 && width > 0 && channels > 0,
            "grid dimensions must be positive"
        );
        assert!(value.is_finite(), "fill value must be finite");
        LatentGrid {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidParameter(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(LatentGrid {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a grid by evaluating `f(row, col, channel)` in storage order.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::from_vec(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.index(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        let i = self.index(row, col, channel);
        self.data[i] = value;
    }

    /// Copies the values under `region` into a new `size x size x C` grid.
    pub fn crop(&self, region: Region) -> Result<LatentGrid> {
        self.check_region(region)?;
        let k = region.size;
        let row_len = k * self.channels;
        let mut data = Vec::with_capacity(k * row_len);
        for r in region.top..region.bottom() {
            let start = self.index(r, region.left, 0);
            data.extend_from_slice(&self.data[start..start + row_len]);
        }
        Ok(LatentGrid {
            height: k,
            width: k,
            channels: self.channels,
            data,
        })
    }

    /// Adds `tile` into the values under `region`; everything else is untouched.
    pub fn paste_add(&mut self, region: Region, tile: &LatentGrid) -> Result<()> {
        self.check_region(region)?;
        let expected = (region.size, region.size, self.channels);
        if tile.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: tile.shape(),
            });
        }
        let row_len = region.size * self.channels;
        for (i, r) in (region.top..region.bottom()).enumerate() {
            let start = self.index(r, region.left, 0);
            let dst = &mut self.data[start..start + row_len];
            let src = &tile.data[i * row_len..(i + 1) * row_len];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(())
    }

    /// Adds `value` to every entry under `region`.
    pub fn region_add_scalar(&mut self, region: Region, value: f64) -> Result<()> {
        self.check_region(region)?;
        let row_len = region.size * self.channels;
        for r in region.top..region.bottom() {
            let start = self.index(r, region.left, 0);
            for d in &mut self.data[start..start + row_len] {
                *d += value;
            }
        }
        Ok(())
    }

    /// Pointwise quotient. Every denominator entry must be strictly positive.
    pub fn elementwise_div(&self, den: &LatentGrid) -> Result<LatentGrid> {
        self.check_same_shape(den)?;
        if let Some(index) = den.data.iter().position(|&w| !(w > 0.0)) {
            return Err(Error::ZeroWeight { index });
        }
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&den.data)
                .map(|(n, d)| n / d)
                .collect(),
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatentGrid {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &LatentGrid, f: impl Fn(f64, f64) -> f64) -> Result<LatentGrid> {
        self.check_same_shape(other)?;
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn sub(&self, other: &LatentGrid) -> Result<LatentGrid> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> LatentGrid {
        self.map(|v| v * factor)
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &LatentGrid) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Serializes as three little-endian `u32` dims (H, W, C) followed by
    /// little-endian `f64` values in storage order.
    pub fn to_golden_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.data.len());
        for dim in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_golden_bytes(bytes: &[u8]) -> Result<LatentGrid> {
        if bytes.len() < 12 {
            return Err(Error::Golden(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        let dim =
            |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let (h, w, c) = (dim(0), dim(1), dim(2));
        let body = &bytes[12..];
        if body.len() != 8 * h * w * c {
            return Err(Error::Golden(format!(
                "header says {h}x{w}x{c} but body holds {} bytes",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        LatentGrid::from_vec(h, w, c, data).map_err(|e| Error::Golden(e.to_string()))
    }

    fn with_data(&self, data: Vec<f64>) -> LatentGrid {
        debug_assert_eq!(data.len(), self.data.len());
        LatentGrid {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    fn check_region(&self, region: Region) -> Result<()> {
        if region.fits(self.height, self.width) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                top: region.top,
                left: region.left,
                size: region.size,
                height: self.height,
                width: self.width,
            })
        }
    }

    fn check_same_shape(&self, other: &LatentGrid) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp4() -> LatentGrid {
        LatentGrid::from_fn(4, 4, 1, |r, c, _| (4 * r + c) as f64).unwrap()
    }

    #[test]
    fn full_extent_crop_is_identity() {
        let g = LatentGrid::filled(4, 4, 1, 7.0);
        assert_eq!(g.crop(Region::new(0, 0, 4)).unwrap(), g);
    }

    #[test]
    fn crop_follows_row_major_indexing() {
        let tile = ramp4().crop(Region::new(1, 1, 2)).unwrap();
        assert_eq!(tile.shape(), (2, 2, 1));
        assert_eq!(tile.as_slice(), &[5.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn crop_rejects_out_of_bounds() {
        let err = ramp4().crop(Region::new(3, 0, 2)).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { .. }));
        assert!(ramp4().crop(Region::new(0, 0, 0)).is_err());
    }

    #[test]
    fn crop_then_paste_matches_direct_indexing() {
        let g =
            LatentGrid::from_fn(6, 5, 2, |r, c, ch| (r * 31 + c * 7 + ch) as f64 * 0.25).unwrap();
        let region = Region::new(2, 1, 3);
        let mut z = LatentGrid::zeros(6, 5, 2);
        z.paste_add(region, &g.crop(region).unwrap()).unwrap();
        for r in 0..6 {
            for c in 0..5 {
                for ch in 0..2 {
                    let want = if region.contains(r, c) {
                        g.get(r, c, ch)
                    } else {
                        0.0
                    };
                    assert_eq!(z.get(r, c, ch), want);
                }
            }
        }
    }

    #[test]
    fn paste_add_is_additive_on_overlap() {
        let mut g = LatentGrid::zeros(4, 4, 1);
        let ones = LatentGrid::filled(2, 2, 1, 1.0);
        g.paste_add(Region::new(0, 0, 2), &ones).unwrap();
        assert_eq!(g.get(0, 0, 0), 1.0);
        assert_eq!(g.get(2, 2, 0), 0.0);
        g.paste_add(Region::new(1, 1, 2), &ones).unwrap();
        assert_eq!(g.get(1, 1, 0), 2.0);
        assert_eq!(g.get(2, 2, 0), 1.0);
        assert_eq!(g.get(0, 3, 0), 0.0);
    }

    #[test]
    fn paste_add_rejects_wrong_tile_shape() {
        let mut g = LatentGrid::zeros(4, 4, 2);
        let tile = LatentGrid::zeros(2, 2, 1);
        assert!(matches!(
            g.paste_add(Region::new(0, 0, 2), &tile),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn division() {
        let six = LatentGrid::filled(3, 2, 2, 6.0);
        let two = LatentGrid::filled(3, 2, 2, 2.0);
        assert_eq!(
            six.elementwise_div(&two).unwrap(),
            LatentGrid::filled(3, 2, 2, 3.0)
        );
        let g = ramp4();
        assert_eq!(
            g.elementwise_div(&LatentGrid::filled(4, 4, 1, 1.0))
                .unwrap(),
            g
        );
    }

    #[test]
    fn division_rejects_zero_weight() {
        let mut w = LatentGrid::filled(2, 2, 1, 1.0);
        w.set(1, 0, 0, 0.0);
        let err = LatentGrid::filled(2, 2, 1, 1.0)
            .elementwise_div(&w)
            .unwrap_err();
        assert!(matches!(err, Error::ZeroWeight { index: 2 }));
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(LatentGrid::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(LatentGrid::from_vec(1, 2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn golden_layout() {
        let g = LatentGrid::from_vec(1, 2, 1, vec![1.0, -0.5]).unwrap();
        let bytes = g.to_golden_bytes();
        assert_eq!(&bytes[..12], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(LatentGrid::from_golden_bytes(&bytes).unwrap(), g);
        assert!(LatentGrid::from_golden_bytes(&bytes[..19]).is_err());
    }

    #[test]
    fn region_center() {
        assert_eq!(Region::new(2, 4, 4).center(), (4.0, 6.0));
        assert_eq!(Region::new(0, 0, 3).center(), (1.5, 1.5));
    }
}
