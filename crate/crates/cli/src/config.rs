//! Flat `key = value` experiment configuration.
//!
//! Keys: kernel, lengthscale, sigma, delta, gamma, kappa, alpha_bar, m,
//! n_cubes, delta_cube, grid_points, iterations, threshold, seed. Lines
//! starting with `#` are comments. Command-line flags override file keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use safebo_core::explore::SafeBoConfig;
use safebo_core::gp::BetaRegularizer;
use safebo_core::kernel::{KernelFamily, KernelSpec};
use safebo_core::scenario::ScenarioParams;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Raw experiment settings before validation.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kernel: KernelFamily,
    pub lengthscale: f64,
    pub sigma: f64,
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub alpha_bar: f64,
    pub m: usize,
    pub n_cubes: usize,
    pub delta_cube: f64,
    pub grid_points: usize,
    pub iterations: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Matern32,
            lengthscale: 0.1,
            sigma: 1e-2,
            delta: 1e-2,
            gamma: 1e-1,
            kappa: 1e-2,
            alpha_bar: 1.0,
            m: 1000,
            n_cubes: 5,
            delta_cube: 0.1,
            grid_points: 1000,
            iterations: 30,
            threshold: 0.0,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_string();
            if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError(format!("duplicate key '{key}'")));
            }
        }
        let mut cfg = Self::default();
        for (key, value) in pairs {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            v.parse()
                .map_err(|e| ConfigError(format!("bad value for {key}: '{v}' ({e})")))
        }
        match key {
            "kernel" => {
                self.kernel = KernelFamily::parse(value)
                    .ok_or_else(|| ConfigError(format!("unknown kernel '{value}'")))?
            }
            "lengthscale" => self.lengthscale = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "alpha_bar" => self.alpha_bar = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "n_cubes" => self.n_cubes = num(key, value)?,
            "delta_cube" => self.delta_cube = num(key, value)?,
            "grid_points" => self.grid_points = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(ConfigError(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Validates ranges (including the scenario admissibility precondition)
    /// and produces the runner configuration.
    pub fn build(&self) -> Result<SafeBoConfig, ConfigError> {
        let kernel = KernelSpec::new(self.kernel, self.lengthscale)
            .map_err(|e| ConfigError(e.to_string()))?;
        if !(self.sigma > 0.0) {
            return Err(ConfigError(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        let scenario = ScenarioParams::new(self.m, self.gamma, self.kappa)
            .map_err(|e| ConfigError(e.to_string()))?;
        if !(self.alpha_bar > 0.0) {
            return Err(ConfigError(format!(
                "alpha_bar must be positive, got {}",
                self.alpha_bar
            )));
        }
        if self.grid_points < 2 {
            return Err(ConfigError("grid_points must be at least 2".into()));
        }
        if self.n_cubes > 0 && !(self.delta_cube > 0.0) {
            return Err(ConfigError(format!(
                "delta_cube must be positive, got {}",
                self.delta_cube
            )));
        }
        Ok(SafeBoConfig {
            kernel,
            noise_std: self.sigma,
            delta: self.delta,
            scenario,
            coeff_bound: self.alpha_bar,
            cube_count: self.n_cubes,
            cube_width: self.delta_cube,
            grid_points: self.grid_points,
            iterations: self.iterations,
            threshold: self.threshold,
            seed: self.seed,
            beta_regularizer: BetaRegularizer::NoiseVariance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let cfg = ExperimentConfig::default().build().unwrap();
        assert_eq!(cfg.scenario.count(), 1000);
        assert_eq!(cfg.grid_points, 1000);
    }

    #[test]
    fn parses_files_with_comments() {
        let text = "# experiment\nkernel = matern32\nlengthscale = 0.2\nm = 500\nseed = 9\n";
        let cfg = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(cfg.lengthscale, 0.2);
        assert_eq!(cfg.m, 500);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rejects_unknown_keys_and_duplicates() {
        assert!(ExperimentConfig::from_text("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_text("m = 1\nm = 2\n").is_err());
    }

    #[test]
    fn precondition_violations_fail_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.m = 10;
        cfg.gamma = 0.01;
        cfg.kappa = 0.001;
        let err = cfg.build().unwrap_err().to_string();
        assert!(err.contains("exceeds kappa"), "got: {err}");
    }
}
