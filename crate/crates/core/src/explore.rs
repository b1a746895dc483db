//! Discretized safe exploration.
//!
//! Per iteration: refit the GP, certify the norm bound, intersect the
//! per-point confidence intervals, certify the safe set through witnesses,
//! flag maximizers and expanders, and sample the most uncertain candidate.
//!
//! The safe set at a point `a'` needs a witness `a` in the previous safe set
//! with `lower(a) - B d_k(a, a') >= h`. The initial safe points stay in the
//! set for the whole run: they are safe by assumption, and dropping them on
//! a noisy dip would let the safe set collapse.

use thiserror::Error;

use crate::domain::BoxBounds;
use crate::gp::{BetaRegularizer, ConfidenceParams, Dataset, GpError, GpPosterior};
use crate::kernel::KernelSpec;
use crate::random::{self, HeuristicEstimator, RandomFunctionConfig, RandomFunctionError};
use crate::runlog::{RunLog, RunRecord, StopReason};
use crate::scenario::{certify_norm, ScenarioParams};
use crate::seed;

/// A finite discretization of a box domain: a uniform lattice plus optional
/// extra points (initial safe samples that fall off the lattice).
#[derive(Debug, Clone)]
pub struct DomainGrid {
    bounds: BoxBounds,
    points: Vec<Vec<f64>>,
    points_per_dim: usize,
}

impl DomainGrid {
    /// Uniform lattice with `points_per_dim` per dimension.
    pub fn uniform(bounds: &BoxBounds, points_per_dim: usize) -> Self {
        Self::with_extras(bounds, points_per_dim, &[]).0
    }

    /// Uniform lattice plus `extras` (deduplicated, exact coordinate match);
    /// returns the grid and the index of every extra point in it.
    pub fn with_extras(
        bounds: &BoxBounds,
        points_per_dim: usize,
        extras: &[Vec<f64>],
    ) -> (Self, Vec<usize>) {
        assert!(points_per_dim >= 2, "need at least two points per dimension");
        let dim = bounds.dim();
        let axes: Vec<Vec<f64>> = bounds
            .bounds()
            .iter()
            .map(|&(lo, hi)| {
                (0..points_per_dim)
                    .map(|i| {
                        if lo == hi {
                            lo
                        } else {
                            lo + (hi - lo) * i as f64 / (points_per_dim - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut points = Vec::with_capacity(points_per_dim.pow(dim as u32));
        let mut idx = vec![0usize; dim];
        loop {
            points.push((0..dim).map(|d| axes[d][idx[d]]).collect::<Vec<f64>>());
            let mut d = dim;
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < points_per_dim {
                    break;
                }
                idx[d] = 0;
                if d == 0 {
                    let mut extra_indices = Vec::with_capacity(extras.len());
                    for e in extras {
                        assert!(bounds.contains(e), "extra point {e:?} outside the box");
                        match points.iter().position(|p| p == e) {
                            Some(i) => extra_indices.push(i),
                            None => {
                                points.push(e.clone());
                                extra_indices.push(points.len() - 1);
                            }
                        }
                    }
                    return (
                        Self {
                            bounds: bounds.clone(),
                            points,
                            points_per_dim,
                        },
                        extra_indices,
                    );
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Index of a point already known to be a grid member.
    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == point)
    }
}

/// Per-grid-point intersected intervals and set membership flags.
///
/// Intervals start at the whole real line and only shrink; the lower bounds
/// are nondecreasing and the upper bounds nonincreasing across iterations.
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Current posterior standard deviation per point.
    pub sigma: Vec<f64>,
    pub safe: Vec<bool>,
    pub maximizer: Vec<bool>,
    pub expander: Vec<bool>,
    /// Witness grid index that certified each safe point.
    pub witness: Vec<Option<usize>>,
    pub bound: f64,
    pub beta: f64,
    /// Total empty-intersection fallbacks over the state's lifetime.
    pub warnings: u32,
}

impl ConfidenceState {
    pub fn new(len: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; len],
            upper: vec![f64::INFINITY; len],
            sigma: vec![f64::NAN; len],
            safe: vec![false; len],
            maximizer: vec![false; len],
            expander: vec![false; len],
            witness: vec![None; len],
            bound: f64::INFINITY,
            beta: f64::INFINITY,
            warnings: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|&&s| s).count()
    }

    pub fn maximizer_count(&self) -> usize {
        self.maximizer.iter().filter(|&&s| s).count()
    }

    pub fn expander_count(&self) -> usize {
        self.expander.iter().filter(|&&s| s).count()
    }

    /// Largest lower bound over the safe set and its grid index.
    pub fn best_safe_lower(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.len() {
            if self.safe[i] {
                match best {
                    Some((_, l)) if l >= self.lower[i] => {}
                    _ => best = Some((i, self.lower[i])),
                }
            }
        }
        best
    }
}

/// Intersects the per-point intervals with the current `mu +- beta sigma`.
///
/// Empties (possible under kernel misspecification) reset the interval to
/// the fresh one and count a warning; the number of new warnings is
/// returned.
pub fn update_confidence(
    state: &mut ConfidenceState,
    grid: &DomainGrid,
    gp: &GpPosterior,
    beta: f64,
    bound: f64,
) -> u32 {
    let (means, vars) = gp.mean_var_batch(grid.points());
    let mut new_warnings = 0;
    for i in 0..grid.len() {
        let sigma = vars[i].sqrt();
        let lo = means[i] - beta * sigma;
        let hi = means[i] + beta * sigma;
        let new_lo = state.lower[i].max(lo);
        let new_hi = state.upper[i].min(hi);
        if new_lo > new_hi {
            state.lower[i] = lo;
            state.upper[i] = hi;
            new_warnings += 1;
        } else {
            state.lower[i] = new_lo;
            state.upper[i] = new_hi;
        }
        state.sigma[i] = sigma;
    }
    state.beta = beta;
    state.bound = bound;
    state.warnings += new_warnings;
    new_warnings
}

/// Recomputes the safe flags from the previous safe set.
///
/// A point joins when some witness in the previous safe set certifies it;
/// the `retained` indices are re-flagged unconditionally (initial safe set
/// retention).
pub fn compute_safe_set(
    state: &mut ConfidenceState,
    grid: &DomainGrid,
    kernel: &KernelSpec,
    bound: f64,
    threshold: f64,
    retained: &[usize],
) {
    let witnesses: Vec<usize> = (0..state.len()).filter(|&i| state.safe[i]).collect();
    let mut safe = vec![false; state.len()];
    let mut witness = vec![None; state.len()];
    for &r in retained {
        safe[r] = true;
        witness[r] = Some(r);
    }
    for j in 0..grid.len() {
        if safe[j] {
            continue;
        }
        for &w in &witnesses {
            let d = kernel.semimetric(grid.point(w), grid.point(j));
            if state.lower[w] - bound * d >= threshold {
                safe[j] = true;
                witness[j] = Some(w);
                break;
            }
        }
    }
    state.safe = safe;
    state.witness = witness;
}

/// Flags the safe points whose upper bound clears the best safe lower bound.
pub fn compute_maximizers(state: &mut ConfidenceState) {
    let best = state.best_safe_lower().map(|(_, l)| l);
    for i in 0..state.len() {
        state.maximizer[i] = match best {
            Some(l) => state.safe[i] && state.upper[i] >= l,
            None => false,
        };
    }
}

/// Flags the safe points that could certify at least one unsafe point under
/// their optimistic value.
pub fn compute_expanders(
    state: &mut ConfidenceState,
    grid: &DomainGrid,
    kernel: &KernelSpec,
    bound: f64,
    threshold: f64,
) {
    let unsafe_indices: Vec<usize> = (0..state.len()).filter(|&i| !state.safe[i]).collect();
    for i in 0..state.len() {
        state.expander[i] = false;
        if !state.safe[i] {
            continue;
        }
        for &j in &unsafe_indices {
            let d = kernel.semimetric(grid.point(i), grid.point(j));
            if state.upper[i] - bound * d >= threshold {
                state.expander[i] = true;
                break;
            }
        }
    }
}

/// The most uncertain maximizer-or-expander: its grid index and
/// `omega = beta * sigma`. Ties break toward the lowest grid index.
pub fn acquire(state: &ConfidenceState) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..state.len() {
        if !(state.maximizer[i] || state.expander[i]) {
            continue;
        }
        let omega = state.beta * state.sigma[i];
        match best {
            Some((_, w)) if w >= omega => {}
            _ => best = Some((i, omega)),
        }
    }
    best
}

/// A black-box objective; evaluations arrive already noisy.
pub trait Objective {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError>;
}

#[derive(Debug, Error)]
#[error("objective evaluation failed: {0}")]
pub struct ObjectiveError(pub String);

/// Where the norm bound comes from during a run.
#[derive(Debug, Clone)]
pub enum BoundSource {
    /// Certify from a fresh scenario batch each iteration.
    Scenario,
    /// Keep one guessed bound for the whole run.
    Fixed(f64),
    /// Replay a recorded bound sequence (oracle substitution).
    PerIteration(Vec<f64>),
}

/// Everything a run needs beyond the domain, initial safe set, and objective.
#[derive(Debug, Clone)]
pub struct SafeBoConfig {
    pub kernel: KernelSpec,
    pub noise_std: f64,
    pub delta: f64,
    pub scenario: ScenarioParams,
    pub coeff_bound: f64,
    /// Local cubes per sample; 0 disables locality.
    pub cube_count: usize,
    /// Base edge length of the local cubes.
    pub cube_width: f64,
    pub grid_points: usize,
    pub iterations: usize,
    pub threshold: f64,
    pub seed: u64,
    pub beta_regularizer: BetaRegularizer,
}

impl SafeBoConfig {
    /// Key-value echo for run-log headers; fixed order.
    pub fn echo(&self, domain: &BoxBounds) -> Vec<(String, String)> {
        use crate::runlog::fmt_g;
        let mut kv = vec![
            ("kernel".to_string(), self.kernel.family().name().to_string()),
            ("lengthscale".to_string(), fmt_g(self.kernel.lengthscale(), 17)),
            ("sigma".to_string(), fmt_g(self.noise_std, 17)),
            ("delta".to_string(), fmt_g(self.delta, 17)),
            ("gamma".to_string(), fmt_g(self.scenario.gamma(), 17)),
            ("kappa".to_string(), fmt_g(self.scenario.kappa(), 17)),
            ("alpha_bar".to_string(), fmt_g(self.coeff_bound, 17)),
            ("m".to_string(), self.scenario.count().to_string()),
            ("n_cubes".to_string(), self.cube_count.to_string()),
            ("delta_cube".to_string(), fmt_g(self.cube_width, 17)),
            ("grid_points".to_string(), self.grid_points.to_string()),
            ("iterations".to_string(), self.iterations.to_string()),
            ("threshold".to_string(), fmt_g(self.threshold, 17)),
            (
                "beta_regularizer".to_string(),
                match self.beta_regularizer {
                    BetaRegularizer::NoiseVariance => "noise_variance".to_string(),
                    BetaRegularizer::NoiseStd => "noise_std".to_string(),
                },
            ),
        ];
        let bounds: Vec<String> = domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| format!("{} {}", fmt_g(lo, 17), fmt_g(hi, 17)))
            .collect();
        kv.push(("domain".to_string(), bounds.join(" ")));
        kv
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("initial safe set must be nonempty")]
    EmptySafeSet,
    #[error("unsafe initial point {point:?}: f = {value} below threshold {threshold}")]
    UnsafeSeed {
        point: Vec<f64>,
        value: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    RandomFunction(#[from] RandomFunctionError),
    #[error("bound schedule exhausted at iteration {0}")]
    ScheduleExhausted(usize),
}

/// One scenario certificate for a sub-domain: heuristic seed, sorted batch
/// norms, discard, previous-bound carry.
#[allow(clippy::too_many_arguments)]
pub(crate) fn certify_region(
    data: &Dataset,
    kernel: &KernelSpec,
    region: &BoxBounds,
    cfg: &SafeBoConfig,
    heuristic: &dyn HeuristicEstimator,
    previous: f64,
    batch_seed: u64,
) -> Result<crate::scenario::NormCertificate, RandomFunctionError> {
    let heuristic_value = heuristic.estimate(data, kernel, region);
    let rand_cfg = RandomFunctionConfig {
        count: cfg.scenario.count(),
        expansion_size: random::expansion_size_for(region.width(), data.len()),
        coeff_bound: cfg.coeff_bound,
        noise_std: cfg.noise_std,
        domain: region.clone(),
        batch_seed,
        zero_tail: false,
    };
    let norms = random::sample_norms(&rand_cfg, data, kernel)?;
    Ok(certify_norm(&norms, heuristic_value, previous, &cfg.scenario))
}

/// Runs safe exploration on the global domain with the certified bound.
pub fn run_global(
    cfg: &SafeBoConfig,
    domain: &BoxBounds,
    initial_safe: &[Vec<f64>],
    objective: &mut dyn Objective,
    heuristic: &dyn HeuristicEstimator,
) -> Result<RunLog, RunError> {
    run_with_bounds(cfg, BoundSource::Scenario, domain, initial_safe, objective, heuristic)
}

/// Runs the fixed-guess baseline: the bound is held constant.
pub fn run_fixed_b(
    cfg: &SafeBoConfig,
    fixed_bound: f64,
    domain: &BoxBounds,
    initial_safe: &[Vec<f64>],
    objective: &mut dyn Objective,
    heuristic: &dyn HeuristicEstimator,
) -> Result<RunLog, RunError> {
    run_with_bounds(
        cfg,
        BoundSource::Fixed(fixed_bound),
        domain,
        initial_safe,
        objective,
        heuristic,
    )
}

/// The global-domain run loop with an explicit bound source.
pub fn run_with_bounds(
    cfg: &SafeBoConfig,
    source: BoundSource,
    domain: &BoxBounds,
    initial_safe: &[Vec<f64>],
    objective: &mut dyn Objective,
    heuristic: &dyn HeuristicEstimator,
) -> Result<RunLog, RunError> {
    if initial_safe.is_empty() {
        return Err(RunError::EmptySafeSet);
    }
    let (grid, seed_indices) = DomainGrid::with_extras(domain, cfg.grid_points, initial_safe);
    let mut state = ConfidenceState::new(grid.len());
    let mut data = Dataset::empty();
    let mut rows = Vec::new();
    let mut stop = StopReason::Completed;
    let mut previous_bound = f64::INFINITY;

    // evaluate the initial safe samples once
    for idx in &seed_indices {
        let point = grid.point(*idx).to_vec();
        match objective.evaluate(&point) {
            Ok(y) => data.push(point, y),
            Err(e) => {
                return Ok(RunLog {
                    config: cfg.echo(domain),
                    seed: cfg.seed,
                    rows,
                    best: None,
                    stop: StopReason::ObjectiveFailure(e.to_string()),
                    proposals: vec![],
                })
            }
        }
    }

    for iteration in 1..=cfg.iterations {
        let gp = GpPosterior::fit(data.clone(), cfg.kernel, cfg.noise_std)?;
        let bound = match &source {
            BoundSource::Scenario => {
                let batch_seed = seed::derive(cfg.seed, &[seed::STREAM_SCENARIO, iteration as u64, 0]);
                let cert =
                    certify_region(&data, &cfg.kernel, domain, cfg, heuristic, previous_bound, batch_seed)?;
                previous_bound = cert.bound;
                cert.bound
            }
            BoundSource::Fixed(b) => *b,
            BoundSource::PerIteration(seq) => *seq
                .get(iteration - 1)
                .ok_or(RunError::ScheduleExhausted(iteration))?,
        };
        let cp = ConfidenceParams::new(bound, cfg.delta).with_regularizer(cfg.beta_regularizer);
        let beta = gp.beta(&cp);
        let warnings = update_confidence(&mut state, &grid, &gp, beta, bound);

        if iteration == 1 {
            for f in state.safe.iter_mut() {
                *f = false;
            }
            for &s in &seed_indices {
                state.safe[s] = true;
                state.witness[s] = Some(s);
            }
        } else {
            compute_safe_set(&mut state, &grid, &cfg.kernel, bound, cfg.threshold, &seed_indices);
        }
        compute_maximizers(&mut state);
        compute_expanders(&mut state, &grid, &cfg.kernel, bound, cfg.threshold);

        let Some((chosen, omega)) = acquire(&state) else {
            stop = StopReason::NoCandidate;
            break;
        };
        let point = grid.point(chosen).to_vec();
        let y = match objective.evaluate(&point) {
            Ok(y) => y,
            Err(e) => {
                stop = StopReason::ObjectiveFailure(e.to_string());
                break;
            }
        };
        data.push(point.clone(), y);
        rows.push(RunRecord {
            iteration,
            point,
            observation: y,
            bound,
            beta,
            omega,
            safe_count: state.safe_count(),
            maximizer_count: state.maximizer_count(),
            expander_count: state.expander_count(),
            best_lower_bound: state.best_safe_lower().map_or(f64::NEG_INFINITY, |(_, l)| l),
            cube_id: 0,
            cube_width: domain.width(),
            cube_bound: bound,
            violation: y < cfg.threshold,
            warnings,
        });
    }

    let best = state
        .best_safe_lower()
        .map(|(i, l)| (grid.point(i).to_vec(), l))
        .or_else(|| seed_indices.first().map(|&i| (grid.point(i).to_vec(), f64::NEG_INFINITY)));
    Ok(RunLog {
        config: cfg.echo(domain),
        seed: cfg.seed,
        rows,
        best,
        stop,
        proposals: vec![],
    })
}
