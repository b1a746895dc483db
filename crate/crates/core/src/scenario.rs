//! Sampling-and-discarding norm certificates.
//!
//! Given `m` sorted sample norms, a heuristic seed value, and the previous
//! bound, `certify_norm` returns a bound that over-estimates a fresh draw
//! from the same distribution with probability at least `1 - gamma`, at
//! confidence at least `1 - kappa`. Discarding the `r` largest norms is
//! admissible while the binomial tail `sum_{i<=r} C(m,i) gamma^i (1-gamma)^{m-i}`
//! stays below `kappa`.
//!
//! All binomial arithmetic runs in log space; direct products underflow for
//! `m` in the hundreds.

use thiserror::Error;

/// Violation level, confidence level, and scenario count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    m: usize,
    gamma: f64,
    kappa: f64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("kappa must lie in (0, 1), got {0}")]
    InvalidKappa(f64),
    #[error("scenario count must be at least 2, got {0}")]
    TooFewScenarios(usize),
    #[error(
        "(1-gamma)^(m-1) (1 + gamma (m-1)) = {value:.3e} exceeds kappa = {kappa:.3e}; \
         increase m or relax gamma/kappa"
    )]
    PreconditionViolated { value: f64, kappa: f64 },
}

impl ScenarioParams {
    /// Validates ranges and the admissibility precondition
    /// `(1-gamma)^{m-1} (1 + gamma (m-1)) <= kappa`.
    pub fn new(m: usize, gamma: f64, kappa: f64) -> Result<Self, ScenarioError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ScenarioError::InvalidGamma(gamma));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(ScenarioError::InvalidKappa(kappa));
        }
        if m < 2 {
            return Err(ScenarioError::TooFewScenarios(m));
        }
        if !theorem_precondition(m, gamma, kappa) {
            let log_value = (m as f64 - 1.0) * (-gamma).ln_1p() + (gamma * (m as f64 - 1.0)).ln_1p();
            return Err(ScenarioError::PreconditionViolated {
                value: log_value.exp(),
                kappa,
            });
        }
        Ok(Self { m, gamma, kappa })
    }

    pub fn count(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn max_admissible_r(&self) -> usize {
        max_admissible_r(self.m, self.gamma, self.kappa)
    }
}

/// Lower binomial CDF `sum_{i=0}^{r} C(m,i) gamma^i (1-gamma)^{m-i}`.
///
/// Log-binomial terms accumulate through a compensated incremental recurrence
/// and are summed with a max shift; relative error stays near 1e-12 up to
/// `m = 1e5`.
pub fn binomial_tail(m: usize, r: usize, gamma: f64) -> f64 {
    assert!(r <= m, "r = {r} exceeds m = {m}");
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    if r == m {
        return 1.0;
    }
    let ln_g = gamma.ln();
    let ln_1mg = (-gamma).ln_1p();
    // ln term_0 = m ln(1-gamma); successive ratios are exact in linear space
    let mut ln_terms = Vec::with_capacity(r + 1);
    let mut ln_t = m as f64 * ln_1mg;
    ln_terms.push(ln_t);
    let mut comp = 0.0; // Kahan compensation for the running log term
    for i in 0..r {
        let inc = ((m - i) as f64 / (i + 1) as f64).ln() + ln_g - ln_1mg;
        let y = inc - comp;
        let s = ln_t + y;
        comp = (s - ln_t) - y;
        ln_t = s;
        ln_terms.push(ln_t);
    }
    let max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = ln_terms.iter().map(|&l| (l - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Largest `r` in `[0, m-1]` with `binomial_tail(m, r, gamma) <= kappa`;
/// `0` when even keeping every scenario does not meet `kappa`.
pub fn max_admissible_r(m: usize, gamma: f64, kappa: f64) -> usize {
    assert!(m >= 1);
    if binomial_tail(m, 0, gamma) > kappa {
        return 0;
    }
    // the tail is nondecreasing in r
    let mut lo = 0;
    let mut hi = m - 1;
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if binomial_tail(m, mid, gamma) <= kappa {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Evaluates `(1-gamma)^{m-1} (1 + gamma (m-1)) <= kappa` in log space.
///
/// Algebraically identical to `binomial_tail(m, 1, gamma) <= kappa`.
pub fn theorem_precondition(m: usize, gamma: f64, kappa: f64) -> bool {
    assert!(gamma > 0.0 && gamma < 1.0);
    assert!(kappa > 0.0 && kappa < 1.0);
    let mf = m as f64;
    let log_value = (mf - 1.0) * (-gamma).ln_1p() + (gamma * (mf - 1.0)).ln_1p();
    log_value <= kappa.ln()
}

/// Which rule produced the certified bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateBranch {
    /// The heuristic already dominated every sample norm.
    HeuristicDominates,
    /// The bound is a sample norm after discarding the admissible top ones.
    Discarded,
    /// The previous bound was smaller and was kept.
    CarriedPrevious,
}

/// Result of one certification step.
#[derive(Debug, Clone, Copy)]
pub struct NormCertificate {
    pub bound: f64,
    pub discarded: usize,
    pub heuristic: f64,
    pub previous: f64,
    pub branch: CertificateBranch,
}

/// One certification step over a sorted batch of sample norms.
///
/// The discard count is the largest `r >= 1` that is both binomially
/// admissible and keeps the bound above the heuristic; when no such `r`
/// exists the bound falls back to the largest sample norm (`r = 0`). The
/// previous bound is carried whenever it is smaller, which makes chained
/// bounds nonincreasing.
pub fn certify_norm(
    sorted_norms: &[f64],
    heuristic: f64,
    previous: f64,
    params: &ScenarioParams,
) -> NormCertificate {
    let m = params.count();
    assert_eq!(sorted_norms.len(), m, "expected {m} norms, got {}", sorted_norms.len());
    assert!(
        sorted_norms.windows(2).all(|w| w[0] <= w[1]),
        "norms must be sorted ascending"
    );
    assert!(heuristic >= 0.0, "heuristic must be nonnegative");
    assert!(previous > 0.0, "previous bound must be positive (infinity initially)");

    let top = sorted_norms[m - 1];
    let (candidate, discarded, mut branch) = if heuristic >= top {
        (heuristic, 0, CertificateBranch::HeuristicDominates)
    } else {
        // number of norms strictly above the heuristic; at least one
        let above = m - sorted_norms.partition_point(|&v| v <= heuristic);
        let r = params.max_admissible_r().min(above - 1);
        if r >= 1 {
            (sorted_norms[m - 1 - r], r, CertificateBranch::Discarded)
        } else {
            (top, 0, CertificateBranch::Discarded)
        }
    };
    let bound = candidate.min(previous);
    if previous < candidate {
        branch = CertificateBranch::CarriedPrevious;
    }
    NormCertificate {
        bound,
        discarded,
        heuristic,
        previous,
        branch,
    }
}
