//! Finite kernel expansions with exactly computable RKHS norms.

use thiserror::Error;

use crate::kernel::KernelSpec;

/// A function `f = sum_s c_s k(., x_s)` given by centers and coefficients.
///
/// Carries its kernel, so the norm `sqrt(c' K c)` is exact up to
/// floating-point arithmetic.
#[derive(Debug, Clone)]
pub struct RkhsFunction {
    centers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    kernel: KernelSpec,
}

#[derive(Debug, Error)]
pub enum RkhsError {
    #[error("cannot scale a function with zero RKHS norm")]
    ZeroNorm,
}

impl RkhsFunction {
    /// Panics if lengths differ, the expansion is empty, or center dimensions
    /// are inconsistent.
    pub fn new(centers: Vec<Vec<f64>>, coeffs: Vec<f64>, kernel: KernelSpec) -> Self {
        assert_eq!(
            centers.len(),
            coeffs.len(),
            "centers and coefficients must have equal length"
        );
        assert!(!centers.is_empty(), "expansion must have at least one term");
        let dim = centers[0].len();
        assert!(
            centers.iter().all(|c| c.len() == dim),
            "all centers must share one dimension"
        );
        Self {
            centers,
            coeffs,
            kernel,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Evaluates `sum_s c_s k(a, x_s)`.
    pub fn eval(&self, a: &[f64]) -> f64 {
        assert_eq!(a.len(), self.dim(), "evaluation point dimension mismatch");
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(x, c)| c * self.kernel.eval(a, x))
            .sum()
    }

    /// The RKHS norm `sqrt(c' K c)`.
    ///
    /// The quadratic form is PSD; values below `-1e-8 * len` indicate a
    /// broken kernel and panic, tinier negatives clamp to zero.
    pub fn norm(&self) -> f64 {
        let sq = self.kernel.quadratic_form(&self.centers, &self.coeffs);
        let tol = -1e-8 * self.len() as f64;
        assert!(sq >= tol, "negative squared norm {sq} below tolerance {tol}");
        sq.max(0.0).sqrt()
    }

    /// Rescales the coefficients so that the norm equals `target`.
    pub fn scale_to_norm(&self, target: f64) -> Result<RkhsFunction, RkhsError> {
        assert!(target > 0.0 && target.is_finite(), "target norm must be positive");
        let current = self.norm();
        if current == 0.0 {
            return Err(RkhsError::ZeroNorm);
        }
        let factor = target / current;
        Ok(RkhsFunction {
            centers: self.centers.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            kernel: self.kernel,
        })
    }

}
