//! Desk-scale experiment drivers: the norm-study and the 1-d toy comparison.

use rayon::prelude::*;

use crate::domain::BoxBounds;
use crate::explore::{run_fixed_b, RunError, SafeBoConfig};
use crate::gp::Dataset;
use crate::kernel::KernelSpec;
use crate::locality::run_localized;
use crate::random::GpMeanNormHeuristic;
use crate::runlog::{fmt_g, RunLog};
use crate::scenario::ScenarioParams;
use crate::seed;
use crate::synthetic::{generate_truth, NoisyOracle, NormTarget, SyntheticTruth, TruthError};
use crate::{explore, locality};

/// Norm-study setup: certify many random truths under uniform sampling and
/// track the bound-to-norm ratio as data accumulates.
#[derive(Debug, Clone)]
pub struct NormStudyParams {
    pub functions: usize,
    pub iterations: usize,
    pub scenario: ScenarioParams,
    pub kernel: KernelSpec,
    pub noise_std: f64,
    pub coeff_bound: f64,
    pub norm_range: (f64, f64),
    pub center_range: (usize, usize),
    pub domain: BoxBounds,
    pub base_seed: u64,
}

impl NormStudyParams {
    /// The defaults used throughout: 50 truths with norms uniform in
    /// `[1, 10]` and 100..1000 centers, 30 iterations, batch size 1000.
    pub fn desk_scale(base_seed: u64) -> Self {
        Self {
            functions: 50,
            iterations: 30,
            scenario: ScenarioParams::new(1000, 0.1, 0.01).expect("valid defaults"),
            kernel: KernelSpec::matern32(0.1),
            noise_std: 1e-2,
            coeff_bound: 1.0,
            norm_range: (1.0, 10.0),
            center_range: (100, 1000),
            domain: BoxBounds::unit_interval(),
            base_seed,
        }
    }
}

/// One `(function, iteration)` cell of the study.
#[derive(Debug, Clone, Copy)]
pub struct NormStudyRow {
    pub function: usize,
    pub iteration: usize,
    pub bound: f64,
    pub truth_norm: f64,
}

impl NormStudyRow {
    pub fn ratio(&self) -> f64 {
        self.bound / self.truth_norm
    }
}

/// Per-iteration aggregates plus the count of truths whose bound ever fell
/// below their norm.
#[derive(Debug, Clone)]
pub struct NormStudySummary {
    pub mean_ratio: Vec<f64>,
    pub std_ratio: Vec<f64>,
    pub underestimating_functions: usize,
}

/// Runs the study; functions are independent and run in parallel, seeded per
/// function, so the output does not depend on thread count.
pub fn norm_study(params: &NormStudyParams) -> (Vec<NormStudyRow>, NormStudySummary) {
    let per_function: Vec<Vec<NormStudyRow>> = (0..params.functions)
        .into_par_iter()
        .map(|fi| study_one_function(params, fi))
        .collect();

    let mut rows = Vec::with_capacity(params.functions * params.iterations);
    let mut under = 0;
    for traj in &per_function {
        if traj.iter().any(|r| r.bound < r.truth_norm) {
            under += 1;
        }
        rows.extend_from_slice(traj);
    }
    let mut mean_ratio = Vec::with_capacity(params.iterations);
    let mut std_ratio = Vec::with_capacity(params.iterations);
    for t in 0..params.iterations {
        let ratios: Vec<f64> = per_function.iter().map(|traj| traj[t].ratio()).collect();
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        mean_ratio.push(mean);
        std_ratio.push(var.sqrt());
    }
    (
        rows,
        NormStudySummary {
            mean_ratio,
            std_ratio,
            underestimating_functions: under,
        },
    )
}

fn study_one_function(params: &NormStudyParams, fi: usize) -> Vec<NormStudyRow> {
    let f_seed = seed::derive(params.base_seed, &[seed::STREAM_STUDY, fi as u64]);
    let truth = generate_truth(
        f_seed,
        &params.domain,
        params.center_range,
        NormTarget::Uniform(params.norm_range.0, params.norm_range.1),
        params.kernel,
    );
    let mut oracle = NoisyOracle::new(truth.clone(), params.noise_std, f_seed);
    let mut acq_rng = seed::rng_from(seed::derive(f_seed, &[seed::STREAM_PROBE]));
    let heuristic = GpMeanNormHeuristic {
        noise_std: params.noise_std,
    };
    let cfg = SafeBoConfig {
        kernel: params.kernel,
        noise_std: params.noise_std,
        delta: 1e-2,
        scenario: params.scenario,
        coeff_bound: params.coeff_bound,
        cube_count: 0,
        cube_width: 0.1,
        grid_points: 2,
        iterations: params.iterations,
        threshold: 0.0,
        seed: f_seed,
        beta_regularizer: Default::default(),
    };

    let mut data = Dataset::empty();
    let mut previous = f64::INFINITY;
    let mut traj = Vec::with_capacity(params.iterations);
    for t in 1..=params.iterations {
        // uniform acquisition: no safety filtering in the study
        let a = params.domain.sample(&mut acq_rng);
        let y = crate::explore::Objective::evaluate(&mut oracle, &a).expect("oracle never fails");
        data.push(a, y);
        let batch_seed = seed::derive(f_seed, &[seed::STREAM_SCENARIO, t as u64, 0]);
        let cert = explore::certify_region(
            &data,
            &params.kernel,
            &params.domain,
            &cfg,
            &heuristic,
            previous,
            batch_seed,
        )
        .expect("scenario batch");
        previous = cert.bound;
        traj.push(NormStudyRow {
            function: fi,
            iteration: t,
            bound: cert.bound,
            truth_norm: truth.norm,
        });
    }
    traj
}

/// Which bound drives a toy run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyMode {
    /// Localized run with the certified bound.
    Certified,
    /// Global run with a fixed guessed bound.
    FixedBound(f64),
}

impl ToyMode {
    pub fn label(&self) -> String {
        match self {
            ToyMode::Certified => "ours".to_string(),
            ToyMode::FixedBound(b) => format!("fixed-b {}", fmt_g(*b, 12)),
        }
    }
}

/// The 1-d toy reward: 1000 random centers scaled to norm 5.
pub fn toy_truth(seed: u64, kernel: KernelSpec) -> SyntheticTruth {
    generate_truth(
        seed,
        &BoxBounds::unit_interval(),
        (1000, 1000),
        NormTarget::Fixed(5.0),
        kernel,
    )
}

/// Number of seeded probes used to pick the initial safe point.
const PROBE_COUNT: usize = 25;

/// The initial safe point: the best of a seeded probe set over the grid.
pub fn toy_initial_safe(truth: &SyntheticTruth, cfg: &SafeBoConfig) -> Vec<Vec<f64>> {
    let grid = explore::DomainGrid::uniform(&truth.domain, cfg.grid_points);
    let mut rng = seed::rng_from(seed::derive(cfg.seed, &[seed::STREAM_PROBE]));
    use rand::Rng;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..PROBE_COUNT {
        let idx = rng.random_range(0..grid.len());
        let p = grid.point(idx).to_vec();
        let v = truth.eval(&p);
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, p));
        }
    }
    vec![best.expect("probe set nonempty").1]
}

/// Runs the toy comparison for one seed; the truth, initial safe point, and
/// noise stream all derive from `cfg.seed`.
pub fn toy_run(cfg: &SafeBoConfig, mode: ToyMode) -> Result<(RunLog, SyntheticTruth), RunError> {
    let truth = toy_truth(cfg.seed, cfg.kernel);
    let initial = toy_initial_safe(&truth, cfg);
    if let Err(TruthError::UnsafeSeed { point, value, threshold }) =
        truth.validate_safe_seed(&initial, cfg.threshold)
    {
        return Err(RunError::UnsafeSeed {
            point,
            value,
            threshold,
        });
    }
    let mut oracle = NoisyOracle::new(truth.clone(), cfg.noise_std, cfg.seed);
    let heuristic = GpMeanNormHeuristic {
        noise_std: cfg.noise_std,
    };
    let domain = truth.domain.clone();
    let mut log = match mode {
        ToyMode::Certified => run_localized(cfg, &domain, &initial, &mut oracle, &heuristic)?,
        ToyMode::FixedBound(b) => {
            let mut global_cfg = cfg.clone();
            global_cfg.cube_count = 0;
            run_fixed_b(&global_cfg, b, &domain, &initial, &mut oracle, &heuristic)?
        }
    };
    log.config.push(("mode".to_string(), mode.label()));
    log.config.push(("truth_norm".to_string(), fmt_g(truth.norm, 12)));
    Ok((log, truth))
}

/// Explored safe-set size of a run (final safe count), used to compare
/// conservatism between modes.
pub fn final_safe_count(log: &RunLog) -> usize {
    log.rows.last().map_or(0, |r| r.safe_count)
}

/// Whether a seed yields a usable toy instance: the probe maximum must sit
/// at or above the threshold.
pub fn toy_seed_is_valid(seed: u64, cfg: &SafeBoConfig) -> bool {
    let mut probe_cfg = cfg.clone();
    probe_cfg.seed = seed;
    let truth = toy_truth(seed, cfg.kernel);
    let initial = toy_initial_safe(&truth, &probe_cfg);
    truth.validate_safe_seed(&initial, cfg.threshold).is_ok()
}

/// First `count` seeds at or after `start` whose toy instances validate.
pub fn valid_toy_seeds(start: u64, count: usize, cfg: &SafeBoConfig) -> Vec<u64> {
    (start..)
        .filter(|&s| toy_seed_is_valid(s, cfg))
        .take(count)
        .collect()
}

pub use locality::enumerate_cubes as cubes_for;
