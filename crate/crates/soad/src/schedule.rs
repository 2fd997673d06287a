//! Forward-diffusion noise schedule.
//!
//! The forward process perturbs a clean state `z0` into
//! `z_t = mu(t) * z0 + sigma(t) * eps` with `eps ~ N(0, I)`. The schedule
//! supplies the coefficient pair `(mu, sigma)` together with the
//! noise-to-signal ratio `r(t) = sigma(t) / mu(t)` used throughout the
//! estimators and the sampler.
//!
//! The default (and currently only) schedule is the variance-preserving
//! cosine schedule `mu = cos(pi t / 2)`, `sigma = sin(pi t / 2)`, for which
//! the standard normal is an exact fixed point of the forward process and
//! `mu^2 + sigma^2 = 1` identically.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoadError};

/// Schedule family identifier. Kept as an enum so alternative
/// variance-preserving schedules can be added behind the same interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    #[default]
    VpCosine,
}

/// Time-dependent coefficients of the forward diffusion.
///
/// `t` is clamped to `[t_min, t_max]` before any coefficient evaluation so
/// that `mu(t) > 0` everywhere and `r(t)` stays finite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::VpCosine,
            t_min: 1e-4,
            t_max: 1.0 - 1e-4,
        }
    }
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < t_max && t_max <= 1.0) {
            return Err(SoadError::Config(format!(
                "schedule clamp bounds must satisfy 0 < t_min < t_max <= 1, got [{t_min}, {t_max}]"
            )));
        }
        Ok(Self { kind, t_min, t_max })
    }

    fn check(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(SoadError::Domain(format!(
                "diffusion time t = {t} outside [0, 1]"
            )));
        }
        Ok(t.clamp(self.t_min, self.t_max))
    }

    /// Coefficients `(mu_t, sigma_t)` of the transition kernel
    /// `p(z_t | z0) = N(mu_t z0, sigma_t^2 I)`.
    pub fn mu_sigma(&self, t: f64) -> Result<(f64, f64)> {
        let tc = self.check(t)?;
        match self.kind {
            ScheduleKind::VpCosine => {
                let a = std::f64::consts::FRAC_PI_2 * tc;
                Ok((a.cos(), a.sin()))
            }
        }
    }

    /// Noise-to-signal ratio `r_t = sigma_t / mu_t`, strictly increasing in t.
    pub fn ratio(&self, t: f64) -> Result<f64> {
        let (mu, sigma) = self.mu_sigma(t)?;
        if mu <= 0.0 {
            return Err(SoadError::Domain(format!(
                "mu(t) = {mu} is not positive at t = {t}; ratio undefined"
            )));
        }
        Ok(sigma / mu)
    }

    /// Exact sample of `p(z_t | z0)` given a standard normal draw `eps`.
    pub fn perturb(&self, z0: ArrayView1<f64>, t: f64, eps: ArrayView1<f64>) -> Result<Array1<f64>> {
        if z0.len() != eps.len() {
            return Err(SoadError::Shape(format!(
                "perturb: z0 has length {} but eps has length {}",
                z0.len(),
                eps.len()
            )));
        }
        let (mu, sigma) = self.mu_sigma(t)?;
        Ok(&z0 * mu + &eps * sigma)
    }
}
