//! Seeded random streams.
//!
//! The generator is SplitMix64. Uniform doubles take the top 53 bits of a
//! draw. Gaussian values come from the Box-Muller transform: each pair of
//! uniforms `(u1, u2)` with `u1` in `(0, 1]` yields
//! `sqrt(-2 ln u1) * cos(2 pi u2)` followed by `sqrt(-2 ln u1) * sin(2 pi u2)`,
//! written into grids in row-major order. An odd-length fill drops the last
//! sine value. Nothing is cached between calls.

use crate::grid::LatentGrid;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream for worker `index`, derived from the master seed.
    pub fn for_worker(master_seed: u64, index: u64) -> Self {
        SplitMix64::new(mix64(
            master_seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    fn next_f64_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[lo, hi]` by rejection, so there is no modulo bias.
    pub fn uniform_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi);
        let span = hi - lo;
        if span == u64::MAX {
            return self.next_u64();
        }
        let n = span + 1;
        let zone = u64::MAX - (u64::MAX % n) - 1;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return lo + x % n;
            }
        }
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for pair in out.chunks_mut(2) {
            let u1 = self.next_f64_open_low();
            let u2 = self.next_f64();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = std::f64::consts::TAU * u2;
            pair[0] = radius * angle.cos();
            if let Some(second) = pair.get_mut(1) {
                *second = radius * angle.sin();
            }
        }
    }

    pub fn gaussian_grid(&mut self, height: usize, width: usize, channels: usize) -> LatentGrid {
        let mut data = vec![0.0; height * width * channels];
        self.fill_gaussian(&mut data);
        LatentGrid::from_vec(height, width, channels, data).expect("Box-Muller output is finite")
    }
}
