//! Stratified Monte Carlo for area integrals over regions bounded by curves.
//!
//! The bounding box is split into a grid of cells with two uniform samples
//! per cell. The integral estimate sums the cell means; its variance is
//! estimated from the within-cell differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct StratifiedSampler {
    points: Vec<Point2>,
    cell_area: f64,
}

impl StratifiedSampler {
    /// About `samples` points over the box `[lo, hi]`, seeded.
    pub fn new(lo: Point2, hi: Point2, samples: usize, seed: u64) -> Self {
        let size = hi - lo;
        let cells = (samples / 2).max(1) as f64;
        let nx = ((cells * size.x / size.y).sqrt().round() as usize).max(1);
        let ny = ((cells / nx as f64).round() as usize).max(1);
        let (dx, dy) = (size.x / nx as f64, size.y / ny as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                for _ in 0..2 {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    points.push(Point2::new(
                        lo.x + (i as f64 + u) * dx,
                        lo.y + (j as f64 + v) * dy,
                    ));
                }
            }
        }
        Self {
            points,
            cell_area: dx * dy,
        }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Integral of the function whose values at [`Self::points`] are given
    /// (zero outside the region of interest).
    pub fn estimate(&self, values: &[f64]) -> VolumeEstimate {
        assert_eq!(values.len(), self.points.len(), "one value per sample point");
        let (mut sum, mut var) = (0.0, 0.0);
        for pair in values.chunks_exact(2) {
            sum += 0.5 * (pair[0] + pair[1]);
            var += 0.25 * (pair[0] - pair[1]).powi(2);
        }
        VolumeEstimate {
            value: self.cell_area * sum,
            std_error: self.cell_area * var.sqrt(),
        }
    }

    /// `∫a / ∫b` with a delta-method standard error.
    pub fn ratio(&self, a: &[f64], b: &[f64]) -> VolumeEstimate {
        let (ea, eb) = (self.estimate(a), self.estimate(b));
        let q = ea.value / eb.value;
        let lin: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - q * y).collect();
        VolumeEstimate {
            value: q,
            std_error: self.estimate(&lin).std_error / eb.value.abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_area_and_moment() {
        let s = StratifiedSampler::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 40_000, 3);
        let inside: Vec<f64> = s.points().iter().map(|p| if p.norm() < 1.0 { 1.0 } else { 0.0 }).collect();
        let area = s.estimate(&inside);
        assert!((area.value - PI).abs() < 4.0 * area.std_error + 1e-3, "{area:?}");
        assert!(area.std_error < 5e-3);
        let r2: Vec<f64> = s.points().iter().map(|p| if p.norm() < 1.0 { p.norm_squared() } else { 0.0 }).collect();
        // ∫_disk r² = π/2, so the mean of r² over the disk is 1/2
        let q = s.ratio(&r2, &inside);
        assert!((q.value - 0.5).abs() < 4.0 * q.std_error + 1e-4, "{q:?}");
    }

    #[test]
    fn seeded_samples_repeat() {
        let a = StratifiedSampler::new(Point2::zeros(), Point2::new(2.0, 1.0), 1000, 9);
        let b = StratifiedSampler::new(Point2::zeros(), Point2::new(2.0, 1.0), 1000, 9);
        assert_eq!(a.points(), b.points());
    }
}
