//! Adaptive local sub-domains.
//!
//! Every past sample is the center of `N` nested cubes of edge `w * delta`,
//! `w = 1..N`, clipped to the domain; the global domain is sub-domain 0.
//! Each cube keeps its own grid, confidence state, data subset, and norm
//! certificate chain, and proposes one candidate per iteration; the most
//! uncertain proposal wins. A cube whose reward restriction is smoother than
//! the global reward earns a smaller certified bound and explores more
//! freely, and separate per-cube grids keep the discretization dense where
//! it matters.
//!
//! With `N = 0` only the global sub-domain exists and the runner reproduces
//! the global loop byte for byte.

use std::collections::BTreeMap;

use crate::domain::BoxBounds;
use crate::explore::{
    acquire, certify_region, compute_expanders, compute_maximizers, compute_safe_set,
    update_confidence, ConfidenceState, DomainGrid, Objective, RunError, SafeBoConfig,
};
use crate::gp::{ConfidenceParams, Dataset, GpPosterior};
use crate::random::HeuristicEstimator;
use crate::runlog::{CubeProposal, RunLog, RunRecord, StopReason};
use crate::seed;

/// Smallest per-dimension grid resolution of a local cube.
const MIN_CUBE_POINTS: usize = 11;

/// Sample index (1-based) a cube id belongs to.
pub fn cube_sample_index(cube_id: u64, cubes_per_sample: usize) -> usize {
    assert!(cube_id >= 1 && cubes_per_sample >= 1);
    ((cube_id - 1) / cubes_per_sample as u64) as usize + 1
}

/// Width multiplier in `1..=N` a cube id carries.
pub fn cube_width_multiplier(cube_id: u64, cubes_per_sample: usize) -> usize {
    assert!(cube_id >= 1 && cubes_per_sample >= 1);
    ((cube_id - 1) % cubes_per_sample as u64) as usize + 1
}

/// All sub-domains for the given samples: the global domain (id 0) plus
/// `N` clipped cubes per sample, ids `(i-1) N + w`.
pub fn enumerate_cubes(
    samples: &[Vec<f64>],
    cubes_per_sample: usize,
    delta: f64,
    domain: &BoxBounds,
) -> Vec<(u64, BoxBounds)> {
    if cubes_per_sample >= 1 {
        assert!(delta > 0.0, "cube width delta must be positive");
    }
    let mut out = vec![(0u64, domain.clone())];
    for (i, sample) in samples.iter().enumerate() {
        for w in 1..=cubes_per_sample {
            let id = (i * cubes_per_sample + w) as u64;
            out.push((id, domain.centered_cube(sample, w as f64 * delta)));
        }
    }
    out
}

struct CubeState {
    region: BoxBounds,
    grid: DomainGrid,
    conf: ConfidenceState,
    previous_bound: f64,
    /// Grid indices re-flagged safe every iteration (the cube's initial set).
    retained: Vec<usize>,
    just_created: bool,
}

/// Runs localized safe exploration (global loop recovered at `N = 0`).
pub fn run_localized(
    cfg: &SafeBoConfig,
    domain: &BoxBounds,
    initial_safe: &[Vec<f64>],
    objective: &mut dyn Objective,
    heuristic: &dyn HeuristicEstimator,
) -> Result<RunLog, RunError> {
    if initial_safe.is_empty() {
        return Err(RunError::EmptySafeSet);
    }
    let mut data = Dataset::empty();
    let mut rows = Vec::new();
    let mut all_proposals = Vec::new();
    let mut stop = StopReason::Completed;
    // per-sample intersected confidence bounds under the global model,
    // used to seed new cubes
    let mut sample_bounds: Vec<(f64, f64)> = Vec::new();
    let mut cubes: BTreeMap<u64, CubeState> = BTreeMap::new();

    for point in initial_safe {
        match objective.evaluate(point) {
            Ok(y) => {
                data.push(point.clone(), y);
                sample_bounds.push((f64::NEG_INFINITY, f64::INFINITY));
            }
            Err(e) => {
                return Ok(RunLog {
                    config: cfg.echo(domain),
                    seed: cfg.seed,
                    rows,
                    best: None,
                    stop: StopReason::ObjectiveFailure(e.to_string()),
                    proposals: all_proposals,
                })
            }
        }
    }

    'run: for iteration in 1..=cfg.iterations {
        let regions = enumerate_cubes(data.inputs(), cfg.cube_count, cfg.cube_width, domain);
        let mut proposals: Vec<CubeProposal> = Vec::new();
        let mut global_row = None;

        for (cube_id, region) in regions {
            if !cubes.contains_key(&cube_id) {
                let created = create_cube(
                    cube_id,
                    &region,
                    cfg,
                    domain,
                    initial_safe,
                    &data,
                    &sample_bounds,
                );
                match created {
                    Some(state) => {
                        cubes.insert(cube_id, state);
                    }
                    None => continue, // no safe seed yet; retry next iteration
                }
            }
            let cube = cubes.get_mut(&cube_id).expect("just inserted");
            let subset = if cube_id == 0 {
                data.clone()
            } else {
                data.restrict_to(&cube.region)
            };
            let gp = GpPosterior::fit(subset.clone(), cfg.kernel, cfg.noise_std)?;
            let batch_seed =
                seed::derive(cfg.seed, &[seed::STREAM_SCENARIO, iteration as u64, cube_id]);
            let cert = certify_region(
                &subset,
                &cfg.kernel,
                &cube.region,
                cfg,
                heuristic,
                cube.previous_bound,
                batch_seed,
            )?;
            cube.previous_bound = cert.bound;
            let cp = ConfidenceParams::new(cert.bound, cfg.delta)
                .with_regularizer(cfg.beta_regularizer);
            let beta = gp.beta(&cp);
            let new_warnings = update_confidence(&mut cube.conf, &cube.grid, &gp, beta, cert.bound);

            if cube.just_created {
                for f in cube.conf.safe.iter_mut() {
                    *f = false;
                }
                for &s in &cube.retained {
                    cube.conf.safe[s] = true;
                    cube.conf.witness[s] = Some(s);
                }
                cube.just_created = false;
            } else {
                compute_safe_set(
                    &mut cube.conf,
                    &cube.grid,
                    &cfg.kernel,
                    cert.bound,
                    cfg.threshold,
                    &cube.retained,
                );
            }
            compute_maximizers(&mut cube.conf);
            compute_expanders(&mut cube.conf, &cube.grid, &cfg.kernel, cert.bound, cfg.threshold);

            if let Some((idx, omega)) = acquire(&cube.conf) {
                proposals.push(CubeProposal {
                    cube_id,
                    cube_width: cube.region.width(),
                    bound: cert.bound,
                    point: cube.grid.point(idx).to_vec(),
                    omega,
                });
            }

            if cube_id == 0 {
                // refresh the per-sample bounds under the global model
                let (means, vars) = gp.mean_var_batch(data.inputs());
                for i in 0..data.len() {
                    let half = beta * vars[i].sqrt();
                    let (lo, hi) = sample_bounds[i];
                    let new_lo = lo.max(means[i] - half);
                    let new_hi = hi.min(means[i] + half);
                    sample_bounds[i] = if new_lo > new_hi {
                        (means[i] - half, means[i] + half)
                    } else {
                        (new_lo, new_hi)
                    };
                }
                global_row = Some((cert.bound, beta, new_warnings));
            }
        }

        let Some((g_bound, g_beta, g_warnings)) = global_row else {
            unreachable!("the global sub-domain is always present");
        };
        let winner = proposals
            .iter()
            .max_by(|a, b| a.omega.total_cmp(&b.omega).then(b.cube_id.cmp(&a.cube_id)))
            .cloned();
        let Some(winner) = winner else {
            stop = StopReason::NoCandidate;
            all_proposals.push(proposals);
            break 'run;
        };
        let y = match objective.evaluate(&winner.point) {
            Ok(y) => y,
            Err(e) => {
                stop = StopReason::ObjectiveFailure(e.to_string());
                all_proposals.push(proposals);
                break 'run;
            }
        };
        data.push(winner.point.clone(), y);
        sample_bounds.push((f64::NEG_INFINITY, f64::INFINITY));
        let global = cubes.get(&0).expect("global cube exists");
        rows.push(RunRecord {
            iteration,
            point: winner.point.clone(),
            observation: y,
            bound: g_bound,
            beta: g_beta,
            omega: winner.omega,
            safe_count: global.conf.safe_count(),
            maximizer_count: global.conf.maximizer_count(),
            expander_count: global.conf.expander_count(),
            best_lower_bound: global
                .conf
                .best_safe_lower()
                .map_or(f64::NEG_INFINITY, |(_, l)| l),
            cube_id: winner.cube_id,
            cube_width: winner.cube_width,
            cube_bound: winner.bound,
            violation: y < cfg.threshold,
            warnings: g_warnings,
        });
        all_proposals.push(proposals);
    }

    let global = cubes.get(&0);
    let best = global
        .and_then(|g| {
            g.conf
                .best_safe_lower()
                .map(|(i, l)| (g.grid.point(i).to_vec(), l))
        })
        .or_else(|| Some((initial_safe[0].clone(), f64::NEG_INFINITY)));
    Ok(RunLog {
        config: cfg.echo(domain),
        seed: cfg.seed,
        rows,
        best,
        stop,
        proposals: all_proposals,
    })
}

/// Builds a cube's grid and initial safe indices; `None` when no safe seed
/// exists yet.
fn create_cube(
    cube_id: u64,
    region: &BoxBounds,
    cfg: &SafeBoConfig,
    domain: &BoxBounds,
    initial_safe: &[Vec<f64>],
    data: &Dataset,
    sample_bounds: &[(f64, f64)],
) -> Option<CubeState> {
    // seed points: initial safe points inside the region (safe by
    // assumption) plus samples inside whose global lower bound clears the
    // threshold
    let s0_inside: Vec<Vec<f64>> = initial_safe
        .iter()
        .filter(|p| region.contains(p))
        .cloned()
        .collect();
    let certified_samples: Vec<Vec<f64>> = data
        .inputs()
        .iter()
        .zip(sample_bounds)
        .filter(|(x, &(lo, _))| region.contains(x) && lo >= cfg.threshold)
        .map(|(x, _)| x.clone())
        .collect();
    if s0_inside.is_empty() && certified_samples.is_empty() {
        return None;
    }
    let (grid, extras, points_per_dim);
    if cube_id == 0 {
        points_per_dim = cfg.grid_points;
        let mut seed_points = s0_inside.clone();
        seed_points.extend(certified_samples);
        (grid, extras) = DomainGrid::with_extras(region, points_per_dim, &seed_points);
    } else {
        let fraction = region.width() / domain.width();
        points_per_dim = ((cfg.grid_points as f64 * fraction).ceil() as usize).max(MIN_CUBE_POINTS);
        let mut seed_points = s0_inside.clone();
        seed_points.extend(certified_samples);
        (grid, extras) = DomainGrid::with_extras(region, points_per_dim, &seed_points);
    }
    let mut retained = extras;
    retained.sort_unstable();
    retained.dedup();
    let conf = ConfidenceState::new(grid.len());
    Some(CubeState {
        region: region.clone(),
        grid,
        conf,
        previous_bound: f64::INFINITY,
        retained,
        just_created: true,
    })
}
