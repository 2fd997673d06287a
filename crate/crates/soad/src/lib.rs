//! Score-based data assimilation with state-observation augmentation.
//!
//! The library builds posterior samples of a dynamical trajectory over a
//! fixed window given partial, noisy, possibly nonlinear observations,
//! without access to the forward model at assimilation time. A denoising
//! diffusion model trained on trajectory windows supplies the prior; the
//! observation operators are folded into an augmented state so that every
//! realized observation becomes a linear subsampling of the augmented
//! vector, and the reverse-time sampler conditions on them exactly.
//!
//! Module map:
//! - [`schedule`]: the variance-preserving forward diffusion and its
//!   coefficient pair (mu_t, sigma_t).
//! - [`denoise`]: the noise-prediction interface, the analytic Gaussian
//!   reference implementation, the trainable feed-forward denoiser, and
//!   denoising-score-matching training.
//! - [`augment`]: observation operators, augmented layout, subsampling
//!   masks, and synthetic observation sets.
//! - [`estimators`]: likelihood-gradient estimators for conditional
//!   sampling (DPS, DMPS, SDA, and the augmented-state estimator).
//! - [`sampler`]: the reverse-time assimilation loop (exponential-integrator
//!   predictor, Langevin corrector, forward-diffusion corrector).
//! - [`dynamics`]: Lorenz-96 and two-layer quasi-geostrophic ground-truth
//!   generation plus dataset windowing and normalization.
//! - [`oracle`]: exact Gaussian conditioning, Kalman/RTS smoothing, and
//!   brute-force quadrature used to verify everything else.
//! - [`harness`]: config-driven experiment sweeps with CSV/JSON reporting.

pub mod augment;
pub mod config;
pub mod denoise;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod sampler;
pub mod schedule;

mod linalg;
mod rng;

pub use error::{Result, SoadError};
pub use schedule::{NoiseSchedule, ScheduleKind};
