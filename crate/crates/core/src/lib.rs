//! Safe Bayesian optimization with scenario-certified RKHS norm bounds.
//!
//! The library discretizes a box domain, models the reward with a GP, and
//! certifies an upper bound on the reward's RKHS norm from batches of random
//! interpolating functions instead of guessing it a priori. The certified
//! bound drives the confidence widths, the safe set, and the acquisition
//! rule. Local sub-domains (cubes around past samples) carry their own
//! certificates, which tightens exploration where the reward is locally
//! smooth.
//!
//! Modules, bottom up:
//! - [`kernel`], [`rkhs`]: kernels, Gram matrices, the kernel semimetric,
//!   finite expansions with exact norms.
//! - [`gp`]: posterior mean/variance and the data-dependent confidence width.
//! - [`random`]: random interpolating expansions and the pluggable norm
//!   heuristic.
//! - [`scenario`]: sampling-and-discarding norm certificates with exact
//!   binomial admissibility.
//! - [`explore`]: the discretized safe-exploration state machine.
//! - [`locality`]: adaptive local cubes with per-cube certificates.
//! - [`synthetic`]: seeded ground truths and noisy oracles.
//! - [`study`]: desk-scale experiment drivers.
//! - [`runlog`]: deterministic run records and CSV rendering.

pub mod domain;
pub mod explore;
pub mod gp;
pub mod kernel;
pub mod locality;
pub mod random;
pub mod rkhs;
pub mod runlog;
pub mod scenario;
pub mod seed;
pub mod study;
pub mod synthetic;

pub use domain::BoxBounds;
pub use gp::{BetaRegularizer, ConfidenceParams, Dataset, GpPosterior};
pub use kernel::{KernelFamily, KernelSpec};
pub use rkhs::RkhsFunction;
pub use scenario::{certify_norm, CertificateBranch, NormCertificate, ScenarioParams};
