//! Axis-aligned boxes: optimization domains and local sub-domains.

use rand::Rng;

/// An axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    dims: Vec<(f64, f64)>,
}

impl BoxBounds {
    /// Builds a box from per-dimension `(lo, hi)` pairs.
    ///
    /// Panics if any `lo > hi` or any bound is non-finite.
    pub fn new(dims: Vec<(f64, f64)>) -> Self {
        assert!(!dims.is_empty(), "box must have at least one dimension");
        for &(lo, hi) in &dims {
            assert!(lo.is_finite() && hi.is_finite(), "box bounds must be finite");
            assert!(lo <= hi, "box lower bound {lo} exceeds upper bound {hi}");
        }
        Self { dims }
    }

    /// The unit interval `[0, 1]`.
    pub fn unit_interval() -> Self {
        Self::new(vec![(0.0, 1.0)])
    }

    /// The unit cube `[0, 1]^n`.
    pub fn unit_cube(n: usize) -> Self {
        Self::new(vec![(0.0, 1.0); n])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.dims
    }

    /// Maximum edge length.
    pub fn width(&self) -> f64 {
        self.dims
            .iter()
            .map(|&(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// Closed-box membership, exact comparisons.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims.len()
            && point
                .iter()
                .zip(&self.dims)
                .all(|(&x, &(lo, hi))| lo <= x && x <= hi)
    }

    /// The cube of edge `width` centered at `center`, clipped to `self`.
    pub fn centered_cube(&self, center: &[f64], width: f64) -> BoxBounds {
        assert_eq!(center.len(), self.dim(), "center dimension mismatch");
        let half = width / 2.0;
        let dims = center
            .iter()
            .zip(&self.dims)
            .map(|(&c, &(lo, hi))| ((c - half).max(lo), (c + half).min(hi)))
            .collect();
        BoxBounds::new(dims)
    }

    /// A uniform draw from the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.dims
            .iter()
            .map(|&(lo, hi)| {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_is_max_edge() {
        let b = BoxBounds::new(vec![(0.0, 1.0), (0.25, 0.5)]);
        assert_eq!(b.width(), 1.0);
    }

    #[test]
    fn centered_cube_clips_at_corner() {
        let b = BoxBounds::unit_interval();
        let c = b.centered_cube(&[0.0], 0.2);
        assert_eq!(c.bounds(), &[(0.0, 0.1)]);
        // width halved along the clipped axis
        assert!((c.width() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn contains_is_closed() {
        let b = BoxBounds::unit_interval();
        assert!(b.contains(&[0.0]));
        assert!(b.contains(&[1.0]));
        assert!(!b.contains(&[1.0 + 1e-12]));
    }
}
