//! Gaussian-process posterior and the data-dependent confidence width.
//!
//! The posterior uses the ridge `lambda = noise_std^2` in `(K + lambda I)`.
//! The confidence width is
//!
//! ```text
//! beta = B + sqrt( s * logdet(I + K/s) - 2 s ln(delta) )
//! ```
//!
//! where `s` is the same ridge by default. The literature this bound comes
//! from is ambiguous about whether `s` is the noise variance or the noise
//! standard deviation, so the alternative reading is available as a switch.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::domain::BoxBounds;
use crate::kernel::KernelSpec;

/// Query inputs and observations collected so far.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Self {
        assert_eq!(inputs.len(), targets.len(), "inputs/targets length mismatch");
        Self { inputs, targets }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, input: Vec<f64>, target: f64) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The subset of observations whose inputs lie inside `bounds`.
    pub fn restrict_to(&self, bounds: &BoxBounds) -> Dataset {
        let mut out = Dataset::empty();
        for (x, &y) in self.inputs.iter().zip(&self.targets) {
            if bounds.contains(x) {
                out.push(x.clone(), y);
            }
        }
        out
    }
}

/// Which regularizer enters the confidence-width formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRegularizer {
    /// `s = noise_std^2`, matching the posterior ridge (default).
    #[default]
    NoiseVariance,
    /// `s = noise_std`, the literal alternative reading.
    NoiseStd,
}

/// Inputs to the confidence width: the current norm bound and `delta`.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceParams {
    pub norm_bound: f64,
    pub delta: f64,
    pub regularizer: BetaRegularizer,
}

impl ConfidenceParams {
    pub fn new(norm_bound: f64, delta: f64) -> Self {
        assert!(norm_bound >= 0.0, "norm bound must be nonnegative");
        assert!(0.0 < delta && delta < 1.0, "delta must lie in (0, 1)");
        Self {
            norm_bound,
            delta,
            regularizer: BetaRegularizer::NoiseVariance,
        }
    }

    pub fn with_regularizer(mut self, regularizer: BetaRegularizer) -> Self {
        self.regularizer = regularizer;
        self
    }
}

#[derive(Debug, Error)]
pub enum GpError {
    #[error(
        "Cholesky factorization of the {size}x{size} ridged Gram matrix failed \
         (ridge {ridge:.3e}, diagonal range [{min_diag:.6e}, {max_diag:.6e}])"
    )]
    Factorization {
        size: usize,
        ridge: f64,
        min_diag: f64,
        max_diag: f64,
    },
}

/// Immutable GP posterior state. Queries are read-only and thread-safe.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    data: Dataset,
    kernel: KernelSpec,
    noise_std: f64,
    lambda: f64,
    gram: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `(K + lambda I)^{-1} y`
    alpha: DVector<f64>,
    /// `logdet(I + K / lambda)`
    logdet_ratio_lambda: f64,
    /// `logdet(I + K / noise_std)`
    logdet_ratio_sigma: f64,
}

impl GpPosterior {
    /// Fits the posterior; the ridge `lambda = noise_std^2` is always present.
    pub fn fit(data: Dataset, kernel: KernelSpec, noise_std: f64) -> Result<Self, GpError> {
        assert!(noise_std > 0.0, "noise standard deviation must be positive");
        let lambda = noise_std * noise_std;
        let t = data.len();
        if t == 0 {
            return Ok(Self {
                data,
                kernel,
                noise_std,
                lambda,
                gram: DMatrix::zeros(0, 0),
                chol: None,
                alpha: DVector::zeros(0),
                logdet_ratio_lambda: 0.0,
                logdet_ratio_sigma: 0.0,
            });
        }
        let gram = kernel.gram(data.inputs()).into_matrix();
        let ridged = &gram + DMatrix::identity(t, t) * lambda;
        let chol = Cholesky::new(ridged.clone()).ok_or_else(|| GpError::Factorization {
            size: t,
            ridge: lambda,
            min_diag: ridged.diagonal().min(),
            max_diag: ridged.diagonal().max(),
        })?;
        // logdet(I + K/lambda) = logdet(K + lambda I) - t ln(lambda)
        let logdet_ridged: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let logdet_ratio_lambda = logdet_ridged - t as f64 * lambda.ln();
        let sigma_ridged = &gram / noise_std + DMatrix::identity(t, t);
        let logdet_ratio_sigma = Cholesky::new(sigma_ridged)
            .map(|c| c.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
            .unwrap_or(logdet_ratio_lambda);
        let y = DVector::from_column_slice(data.targets());
        let alpha = chol.solve(&y);
        Ok(Self {
            data,
            kernel,
            noise_std,
            lambda,
            gram,
            chol: Some(chol),
            alpha,
            logdet_ratio_lambda,
            logdet_ratio_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Posterior mean and variance at one point. The variance is clamped to
    /// `[0, k(a,a)]`; cancellation near sampled points would otherwise let it
    /// dip slightly outside.
    pub fn mean_var(&self, a: &[f64]) -> (f64, f64) {
        let prior = self.kernel.eval(a, a);
        let Some(chol) = &self.chol else {
            return (0.0, prior);
        };
        let k = DVector::from_iterator(
            self.len(),
            self.data.inputs().iter().map(|x| self.kernel.eval(a, x)),
        );
        let mean = k.dot(&self.alpha);
        let var = prior - k.dot(&chol.solve(&k));
        (mean, var.clamp(0.0, prior))
    }

    /// Batched posterior means and variances; one solve for the whole set.
    pub fn mean_var_batch(&self, points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = points.len();
        let Some(chol) = &self.chol else {
            let means = vec![0.0; n];
            let vars = points.iter().map(|p| self.kernel.eval(p, p)).collect();
            return (means, vars);
        };
        let t = self.len();
        let mut cross = DMatrix::zeros(t, n);
        for (j, p) in points.iter().enumerate() {
            for (i, x) in self.data.inputs().iter().enumerate() {
                cross[(i, j)] = self.kernel.eval(p, x);
            }
        }
        let solved = chol.solve(&cross);
        let mut means = Vec::with_capacity(n);
        let mut vars = Vec::with_capacity(n);
        for (j, p) in points.iter().enumerate() {
            let kj = cross.column(j);
            let prior = self.kernel.eval(p, p);
            means.push(kj.dot(&self.alpha));
            vars.push((prior - kj.dot(&solved.column(j))).clamp(0.0, prior));
        }
        (means, vars)
    }

    /// `logdet(I + K/s)` for the configured regularizer choice.
    pub fn logdet_ratio(&self, regularizer: BetaRegularizer) -> f64 {
        match regularizer {
            BetaRegularizer::NoiseVariance => self.logdet_ratio_lambda,
            BetaRegularizer::NoiseStd => self.logdet_ratio_sigma,
        }
    }

    /// The confidence width `beta = B + sqrt(s logdet(I + K/s) - 2 s ln delta)`.
    ///
    /// Strictly greater than `B` for `delta < 1`; equal to `B` in the
    /// `delta -> 1` limit.
    pub fn beta(&self, cp: &ConfidenceParams) -> f64 {
        let s = match cp.regularizer {
            BetaRegularizer::NoiseVariance => self.lambda,
            BetaRegularizer::NoiseStd => self.noise_std,
        };
        let inner = s * self.logdet_ratio(cp.regularizer) - 2.0 * s * cp.delta.ln();
        cp.norm_bound + inner.max(0.0).sqrt()
    }

    /// `(mu - beta sigma, mu + beta sigma)` at one point.
    pub fn confidence_interval(&self, cp: &ConfidenceParams, a: &[f64]) -> (f64, f64) {
        let beta = self.beta(cp);
        let (mean, var) = self.mean_var(a);
        let half = beta * var.sqrt();
        (mean - half, mean + half)
    }

    /// RKHS norm of the posterior mean, `sqrt(y'(K+lI)^{-1} K (K+lI)^{-1} y)`.
    ///
    /// Zero on an empty dataset. For noise-free data from a known expansion
    /// this under-estimates the expansion's norm (minimal-norm interpolation).
    pub fn mean_function_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let sq = self.alpha.dot(&(&self.gram * &self.alpha));
        sq.max(0.0).sqrt()
    }

    /// The posterior mean as an explicit kernel expansion.
    pub fn mean_function(&self) -> Option<crate::rkhs::RkhsFunction> {
        if self.is_empty() {
            return None;
        }
        Some(crate::rkhs::RkhsFunction::new(
            self.data.inputs().to_vec(),
            self.alpha.iter().copied().collect(),
            self.kernel,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::rkhs::RkhsFunction;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn spec() -> KernelSpec {
        KernelSpec::matern32(0.1)
    }

    #[test]
    fn prior_is_zero_mean_unit_variance() {
        let gp = GpPosterior::fit(Dataset::empty(), spec(), 1e-2).unwrap();
        let (m, v) = gp.mean_var(&[0.4]);
        assert_eq!(m, 0.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn interpolates_in_the_small_ridge_limit() {
        let data = Dataset::new(vec![vec![0.3]], vec![1.7]);
        let gp = GpPosterior::fit(data, spec(), 1e-6).unwrap();
        let (m, v) = gp.mean_var(&[0.3]);
        assert_relative_eq!(m, 1.7, max_relative = 1e-5);
        assert!(v >= 0.0 && v < 1e-5);
    }

    #[test]
    fn matches_explicit_two_by_two_inverse() {
        let mut rng = crate::seed::rng_from(3);
        for _ in 0..20 {
            let x1 = rng.random_range(0.0..1.0);
            let x2 = rng.random_range(0.0..1.0);
            let y1 = rng.random_range(-1.0..1.0);
            let y2 = rng.random_range(-1.0..1.0);
            let sigma = 1e-2;
            let lambda = a_sq(sigma);
            let k = spec();
            let data = Dataset::new(vec![vec![x1], vec![x2]], vec![y1, y2]);
            let gp = GpPosterior::fit(data, k, sigma).unwrap();

            let a = [rng.random_range(0.0..1.0)];
            let k12 = k.eval(&[x1], &[x2]);
            let a11 = 1.0 + lambda;
            let det = a11 * a11 - k12 * k12;
            let (i11, i12, i22) = (a11 / det, -k12 / det, a11 / det);
            let k1 = k.eval(&a, &[x1]);
            let k2 = k.eval(&a, &[x2]);
            let mean = k1 * (i11 * y1 + i12 * y2) + k2 * (i12 * y1 + i22 * y2);
            let var = 1.0 - (k1 * (i11 * k1 + i12 * k2) + k2 * (i12 * k1 + i22 * k2));

            let (m, v) = gp.mean_var(&a);
            assert_relative_eq!(m, mean, max_relative = 1e-8, epsilon = 1e-10);
            assert_relative_eq!(v, var.max(0.0), max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    fn a_sq(x: f64) -> f64 {
        x * x
    }

    #[test]
    fn beta_empty_dataset_closed_form() {
        let gp = GpPosterior::fit(Dataset::empty(), spec(), 1e-2).unwrap();
        let cp = ConfidenceParams::new(2.0, 1e-2);
        let lambda = 1e-4;
        let expected = 2.0 + (-2.0 * lambda * (1e-2f64).ln()).sqrt();
        assert_relative_eq!(gp.beta(&cp), expected, max_relative = 1e-14);
    }

    #[test]
    fn beta_single_point_closed_form() {
        let data = Dataset::new(vec![vec![0.5]], vec![0.3]);
        let gp = GpPosterior::fit(data, spec(), 1e-2).unwrap();
        let cp = ConfidenceParams::new(1.0, 1e-2);
        let lambda = 1e-4f64;
        let expected = 1.0 + (lambda * (1.0 + 1.0 / lambda).ln() + 2.0 * lambda * 100f64.ln()).sqrt();
        assert_relative_eq!(gp.beta(&cp), expected, max_relative = 1e-12);
        // the sqrt term itself, against hand arithmetic
        assert_relative_eq!(gp.beta(&cp) - 1.0, 0.042919437017454806, max_relative = 1e-12);
    }

    #[test]
    fn logdet_never_decreases_with_data() {
        let mut rng = crate::seed::rng_from(7);
        for _ in 0..20 {
            let mut data = Dataset::empty();
            let mut prev = 0.0;
            for _ in 0..8 {
                data.push(vec![rng.random_range(0.0..1.0)], rng.random_range(-1.0..1.0));
                let gp = GpPosterior::fit(data.clone(), spec(), 1e-2).unwrap();
                let ld = gp.logdet_ratio(BetaRegularizer::NoiseVariance);
                assert!(ld >= prev - 1e-9, "logdet decreased: {prev} -> {ld}");
                prev = ld;
            }
        }
    }

    #[test]
    fn confidence_interval_brackets_recomputed_bounds() {
        let mut rng = crate::seed::rng_from(13);
        let data = Dataset::new(
            (0..5).map(|_| vec![rng.random_range(0.0..1.0)]).collect(),
            (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let gp = GpPosterior::fit(data, spec(), 1e-2).unwrap();
        let cp = ConfidenceParams::new(3.0, 1e-2);
        for _ in 0..20 {
            let a = [rng.random_range(0.0..1.0)];
            let (lo, hi) = gp.confidence_interval(&cp, &a);
            let (m, v) = gp.mean_var(&a);
            let beta = gp.beta(&cp);
            assert!(lo <= hi);
            assert_relative_eq!(lo, m - beta * v.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(hi, m + beta * v.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_interval_at_zero_variance() {
        let data = Dataset::new(vec![vec![0.5]], vec![0.2]);
        let gp = GpPosterior::fit(data, spec(), 1e-7).unwrap();
        let cp = ConfidenceParams::new(1.0, 1e-2);
        let (lo, hi) = gp.confidence_interval(&cp, &[0.5]);
        assert!(hi - lo < 1e-4, "interval should be nearly degenerate at a sample");
    }

    #[test]
    fn mean_norm_zero_observation() {
        let data = Dataset::new(vec![vec![0.5]], vec![0.0]);
        let gp = GpPosterior::fit(data, spec(), 1e-2).unwrap();
        assert_eq!(gp.mean_function_norm(), 0.0);
    }

    #[test]
    fn mean_norm_under_estimates_truth_noise_free() {
        let mut rng = crate::seed::rng_from(19);
        let centers: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let coeffs: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = RkhsFunction::new(centers, coeffs, spec())
            .scale_to_norm(4.0)
            .unwrap();
        let inputs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| g.eval(x)).collect();
        let gp = GpPosterior::fit(Dataset::new(inputs, targets), spec(), 1e-6).unwrap();
        assert!(
            gp.mean_function_norm() <= g.norm() + 1e-6,
            "interpolant norm must not exceed the truth norm"
        );
    }

    #[test]
    fn mean_norm_matches_matrix_product_oracle() {
        let mut rng = crate::seed::rng_from(23);
        let x1 = rng.random_range(0.0..1.0);
        let x2 = rng.random_range(0.0..1.0);
        let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let sigma = 1e-2;
        let k = spec();
        let gp = GpPosterior::fit(
            Dataset::new(vec![vec![x1], vec![x2]], y.to_vec()),
            k,
            sigma,
        )
        .unwrap();
        let k12 = k.eval(&[x1], &[x2]);
        let lambda = sigma * sigma;
        let gram = nalgebra::Matrix2::new(1.0, k12, k12, 1.0);
        let ridged = nalgebra::Matrix2::new(1.0 + lambda, k12, k12, 1.0 + lambda);
        let inv = ridged.try_inverse().unwrap();
        let c = inv * nalgebra::Vector2::new(y[0], y[1]);
        let expected = (c.transpose() * gram * c)[(0, 0)].max(0.0).sqrt();
        assert_relative_eq!(gp.mean_function_norm(), expected, max_relative = 1e-10);
    }

    #[test]
    fn variance_non_increasing_in_data() {
        let mut rng = crate::seed::rng_from(29);
        for _ in 0..50 {
            let probe = [rng.random_range(0.0..1.0)];
            let mut data = Dataset::empty();
            let mut prev = f64::INFINITY;
            for _ in 0..6 {
                data.push(vec![rng.random_range(0.0..1.0)], rng.random_range(-1.0..1.0));
                let gp = GpPosterior::fit(data.clone(), spec(), 1e-2).unwrap();
                let (_, v) = gp.mean_var(&probe);
                assert!(v <= prev + 1e-10, "variance increased: {prev} -> {v}");
                prev = v;
            }
        }
    }

    #[test]
    fn noise_free_interpolation_at_all_samples() {
        let mut rng = crate::seed::rng_from(37);
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gp = GpPosterior::fit(Dataset::new(inputs.clone(), targets.clone()), spec(), 1e-6)
            .unwrap();
        for (x, &y) in inputs.iter().zip(&targets) {
            let (m, _) = gp.mean_var(x);
            assert!((m - y).abs() <= 1e-5, "interpolation error {} at {x:?}", (m - y).abs());
        }
    }

    #[test]
    fn beta_tends_to_norm_bound_as_delta_tends_to_one() {
        // empty dataset: the log-delta term is all there is, so beta -> B
        let prior = GpPosterior::fit(Dataset::empty(), spec(), 1e-2).unwrap();
        let b = 2.5;
        let at_one = prior.beta(&ConfidenceParams::new(b, 1.0 - 1e-15));
        assert!(at_one - b < 1e-8, "prior beta should collapse to B, excess {}", at_one - b);
        // with data only the logdet term survives the limit
        let data = Dataset::new(vec![vec![0.2], vec![0.9]], vec![0.1, -0.4]);
        let gp = GpPosterior::fit(data, spec(), 1e-2).unwrap();
        let lambda = 1e-4;
        let residual = (lambda * gp.logdet_ratio(BetaRegularizer::NoiseVariance)).sqrt();
        let loose = gp.beta(&ConfidenceParams::new(b, 1.0 - 1e-15));
        assert_relative_eq!(loose - b, residual, max_relative = 1e-6);
        let tight = gp.beta(&ConfidenceParams::new(b, 1e-6));
        assert!(tight > loose);
    }

    #[test]
    fn batch_matches_single_point_queries() {
        let mut rng = crate::seed::rng_from(41);
        let data = Dataset::new(
            (0..6).map(|_| vec![rng.random_range(0.0..1.0)]).collect(),
            (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let gp = GpPosterior::fit(data, spec(), 1e-2).unwrap();
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let (means, vars) = gp.mean_var_batch(&pts);
        for (i, p) in pts.iter().enumerate() {
            let (m, v) = gp.mean_var(p);
            assert_relative_eq!(means[i], m, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(vars[i], v, max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn variance_stays_within_prior_bounds() {
        let mut rng = crate::seed::rng_from(43);
        for family in [KernelFamily::Matern32, KernelFamily::Matern52] {
            let k = KernelSpec::new(family, 0.1).unwrap();
            let data = Dataset::new(
                (0..10).map(|_| vec![rng.random_range(0.0..1.0)]).collect(),
                (0..10).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let gp = GpPosterior::fit(data, k, 1e-2).unwrap();
            for _ in 0..50 {
                let a = [rng.random_range(0.0..1.0)];
                let (_, v) = gp.mean_var(&a);
                assert!((0.0..=1.0 + 1e-8).contains(&v));
            }
        }
    }
}
