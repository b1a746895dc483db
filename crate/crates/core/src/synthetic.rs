//! Seeded ground-truth rewards and noisy oracles for desk-scale experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::domain::BoxBounds;
use crate::explore::{Objective, ObjectiveError};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::rkhs::RkhsFunction;
use crate::runlog::fmt_g;
use crate::seed;

/// How the target norm of a generated truth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormTarget {
    Fixed(f64),
    Uniform(f64, f64),
}

/// The generation recipe, kept for reproducibility.
#[derive(Debug, Clone)]
pub struct TruthRecipe {
    pub seed: u64,
    pub center_range: (usize, usize),
    pub target: NormTarget,
}

/// A reward function with an exactly known RKHS norm.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub function: RkhsFunction,
    pub norm: f64,
    pub domain: BoxBounds,
    pub recipe: TruthRecipe,
}

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("unsafe initial point: f({point:?}) = {value} below threshold {threshold}")]
    UnsafeSeed {
        point: Vec<f64>,
        value: f64,
        threshold: f64,
    },
    #[error("truth text is malformed: {0}")]
    Parse(String),
}

/// Generates a truth: centers uniform in the domain, raw coefficients
/// uniform in `[-1, 1]`, rescaled to the drawn target norm.
///
/// A zero raw norm (probability zero) retries with the next sub-seed.
pub fn generate_truth(
    base_seed: u64,
    domain: &BoxBounds,
    center_range: (usize, usize),
    target: NormTarget,
    kernel: KernelSpec,
) -> SyntheticTruth {
    let (lo, hi) = center_range;
    assert!(1 <= lo && lo <= hi, "invalid center count range");
    for attempt in 0..16 {
        let mut rng = seed::rng_from(seed::derive(base_seed, &[seed::STREAM_TRUTH, attempt]));
        let count = rng.random_range(lo..=hi);
        let centers: Vec<Vec<f64>> = (0..count).map(|_| domain.sample(&mut rng)).collect();
        let coeffs: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = match target {
            NormTarget::Fixed(v) => v,
            NormTarget::Uniform(a, b) => rng.random_range(a..=b),
        };
        let raw = RkhsFunction::new(centers, coeffs, kernel);
        if let Ok(function) = raw.scale_to_norm(norm) {
            return SyntheticTruth {
                function,
                norm,
                domain: domain.clone(),
                recipe: TruthRecipe {
                    seed: base_seed,
                    center_range,
                    target,
                },
            };
        }
    }
    unreachable!("sixteen consecutive zero-norm draws")
}

impl SyntheticTruth {
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.function.eval(point)
    }

    /// Checks `f(a) >= threshold` for every proposed initial safe point.
    pub fn validate_safe_seed(&self, points: &[Vec<f64>], threshold: f64) -> Result<(), TruthError> {
        for p in points {
            let value = self.eval(p);
            if value < threshold {
                return Err(TruthError::UnsafeSeed {
                    point: p.clone(),
                    value,
                    threshold,
                });
            }
        }
        Ok(())
    }

    /// Plain-text serialization: kernel, norm, then one `center... coeff`
    /// line per expansion term, all at 17 significant digits.
    pub fn to_text(&self) -> String {
        let f = &self.function;
        let mut out = String::new();
        out.push_str(&format!("kernel = {}\n", f.kernel().family().name()));
        out.push_str(&format!("lengthscale = {}\n", fmt_g(f.kernel().lengthscale(), 17)));
        out.push_str(&format!("output_scale = {}\n", fmt_g(f.kernel().output_scale(), 17)));
        let bounds: Vec<String> = self
            .domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| format!("{} {}", fmt_g(lo, 17), fmt_g(hi, 17)))
            .collect();
        out.push_str(&format!("domain = {}\n", bounds.join(" ")));
        out.push_str(&format!("norm = {}\n", fmt_g(self.norm, 17)));
        out.push_str(&format!("terms = {}\n", f.len()));
        for (center, coeff) in f.centers().iter().zip(f.coeffs()) {
            let cs: Vec<String> = center.iter().map(|&x| fmt_g(x, 17)).collect();
            out.push_str(&format!("{} {}\n", cs.join(" "), fmt_g(*coeff, 17)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TruthError> {
        let mut kernel_family = None;
        let mut lengthscale = None;
        let mut output_scale = 1.0;
        let mut domain = None;
        let mut norm = None;
        let mut terms = None;
        let mut centers = Vec::new();
        let mut coeffs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "kernel" => {
                        kernel_family = Some(KernelFamily::parse(value).ok_or_else(|| {
                            TruthError::Parse(format!("unknown kernel '{value}'"))
                        })?)
                    }
                    "lengthscale" => lengthscale = Some(parse_f64(value)?),
                    "output_scale" => output_scale = parse_f64(value)?,
                    "norm" => norm = Some(parse_f64(value)?),
                    "terms" => {
                        terms = Some(value.parse::<usize>().map_err(|e| {
                            TruthError::Parse(format!("bad term count '{value}': {e}"))
                        })?)
                    }
                    "domain" => {
                        let nums: Result<Vec<f64>, _> =
                            value.split_whitespace().map(parse_f64).collect();
                        let nums = nums?;
                        if nums.len() % 2 != 0 || nums.is_empty() {
                            return Err(TruthError::Parse("domain needs lo/hi pairs".into()));
                        }
                        domain = Some(BoxBounds::new(
                            nums.chunks(2).map(|c| (c[0], c[1])).collect(),
                        ));
                    }
                    _ => return Err(TruthError::Parse(format!("unknown key '{key}'"))),
                }
            } else {
                let nums: Result<Vec<f64>, _> = line.split_whitespace().map(parse_f64).collect();
                let mut nums = nums?;
                if nums.len() < 2 {
                    return Err(TruthError::Parse(format!("term line too short: '{line}'")));
                }
                let coeff = nums.pop().expect("nonempty");
                centers.push(nums);
                coeffs.push(coeff);
            }
        }
        let family = kernel_family.ok_or_else(|| TruthError::Parse("missing kernel".into()))?;
        let ell = lengthscale.ok_or_else(|| TruthError::Parse("missing lengthscale".into()))?;
        let domain = domain.ok_or_else(|| TruthError::Parse("missing domain".into()))?;
        let norm = norm.ok_or_else(|| TruthError::Parse("missing norm".into()))?;
        if let Some(t) = terms {
            if t != centers.len() {
                return Err(TruthError::Parse(format!(
                    "expected {t} terms, found {}",
                    centers.len()
                )));
            }
        }
        let kernel = KernelSpec::with_output_scale(family, ell, output_scale)
            .map_err(|e| TruthError::Parse(e.to_string()))?;
        Ok(SyntheticTruth {
            function: RkhsFunction::new(centers, coeffs, kernel),
            norm,
            domain,
            recipe: TruthRecipe {
                seed: 0,
                center_range: (0, 0),
                target: NormTarget::Fixed(norm),
            },
        })
    }
}

fn parse_f64(s: &str) -> Result<f64, TruthError> {
    s.parse::<f64>()
        .map_err(|e| TruthError::Parse(format!("bad number '{s}': {e}")))
}

/// A sequential noisy view of a truth: `y = f(a) + eps`, with `eps` drawn
/// from a per-call counter-derived stream.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    truth: SyntheticTruth,
    noise_std: f64,
    seed: u64,
    counter: u64,
}

impl NoisyOracle {
    pub fn new(truth: SyntheticTruth, noise_std: f64, seed: u64) -> Self {
        assert!(noise_std >= 0.0);
        Self {
            truth,
            noise_std,
            seed,
            counter: 0,
        }
    }

    pub fn truth(&self) -> &SyntheticTruth {
        &self.truth
    }

    pub fn calls(&self) -> u64 {
        self.counter
    }
}

impl Objective for NoisyOracle {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        let mut rng = seed::rng_from(seed::derive(self.seed, &[seed::STREAM_NOISE, self.counter]));
        self.counter += 1;
        let eps: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        Ok(self.truth.eval(point) + self.noise_std * eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> KernelSpec {
        KernelSpec::matern32(0.1)
    }

    #[test]
    fn generation_is_reproducible() {
        let d = BoxBounds::unit_interval();
        let a = generate_truth(7, &d, (50, 100), NormTarget::Fixed(5.0), spec());
        let b = generate_truth(7, &d, (50, 100), NormTarget::Fixed(5.0), spec());
        assert_eq!(a.function.coeffs(), b.function.coeffs());
        assert_eq!(a.norm, b.norm);
    }

    #[test]
    fn fixed_target_is_met() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(3, &d, (1000, 1000), NormTarget::Fixed(5.0), spec());
        assert_relative_eq!(t.function.norm(), 5.0, max_relative = 1e-10);
        assert_eq!(t.function.len(), 1000);
    }

    #[test]
    fn uniform_target_stays_in_range() {
        let d = BoxBounds::unit_interval();
        for s in 0..20 {
            let t = generate_truth(s, &d, (100, 1000), NormTarget::Uniform(1.0, 10.0), spec());
            assert!(t.norm >= 1.0 && t.norm <= 10.0);
            assert_relative_eq!(t.function.norm(), t.norm, max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_noise_oracle_is_exact() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(11, &d, (50, 50), NormTarget::Fixed(2.0), spec());
        let expected = t.eval(&[0.3]);
        let mut o = NoisyOracle::new(t, 0.0, 1);
        assert_eq!(o.evaluate(&[0.3]).unwrap(), expected);
    }

    #[test]
    fn oracle_streams_are_deterministic() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(13, &d, (50, 50), NormTarget::Fixed(2.0), spec());
        let mut a = NoisyOracle::new(t.clone(), 1e-2, 9);
        let mut b = NoisyOracle::new(t, 1e-2, 9);
        for i in 0..10 {
            let p = [i as f64 / 10.0];
            assert_eq!(a.evaluate(&p).unwrap(), b.evaluate(&p).unwrap());
        }
    }

    #[test]
    fn oracle_mean_concentrates_on_truth() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(17, &d, (50, 50), NormTarget::Fixed(2.0), spec());
        let sigma = 1e-2;
        let value = t.eval(&[0.6]);
        let mut o = NoisyOracle::new(t, sigma, 23);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| o.evaluate(&[0.6]).unwrap()).sum::<f64>() / n as f64;
        // CLT band: 4 sigma / sqrt(n)
        assert!((mean - value).abs() <= 4.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn known_norm_continuity_on_dense_pairs() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(19, &d, (200, 200), NormTarget::Fixed(5.0), spec());
        let mut rng = seed::rng_from(101);
        use rand::Rng;
        for _ in 0..2000 {
            let a = [rng.random_range(0.0..1.0)];
            let b = [rng.random_range(0.0..1.0)];
            let lhs = (t.eval(&a) - t.eval(&b)).abs();
            let rhs = t.norm * spec().semimetric(&a, &b);
            assert!(lhs <= rhs + 1e-8);
        }
    }

    #[test]
    fn safe_seed_validation() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(23, &d, (100, 100), NormTarget::Fixed(5.0), spec());
        // find a point above and a point below zero
        let grid: Vec<Vec<f64>> = (0..101).map(|i| vec![i as f64 / 100.0]).collect();
        let best = grid
            .iter()
            .max_by(|a, b| t.eval(a).total_cmp(&t.eval(b)))
            .unwrap()
            .clone();
        let worst = grid
            .iter()
            .min_by(|a, b| t.eval(a).total_cmp(&t.eval(b)))
            .unwrap()
            .clone();
        assert!(t.validate_safe_seed(&[best], 0.0).is_ok());
        assert!(t.validate_safe_seed(&[worst], 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let d = BoxBounds::unit_interval();
        let t = generate_truth(29, &d, (40, 40), NormTarget::Fixed(3.0), spec());
        let text = t.to_text();
        let back = SyntheticTruth::from_text(&text).unwrap();
        assert_eq!(back.function.centers(), t.function.centers());
        assert_eq!(back.function.coeffs(), t.function.coeffs());
        assert_eq!(back.norm, t.norm);
        assert_eq!(back.domain, t.domain);
        for i in 0..20 {
            let p = [i as f64 / 20.0];
            assert_eq!(back.eval(&p), t.eval(&p));
        }
    }
}
