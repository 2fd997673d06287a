//! Noise-prediction (denoiser) interface and its implementations.
//!
//! A denoiser estimates the standard normal draw that produced a perturbed
//! state: `eps_hat(z_t, t) ~ -sigma_t * grad log p_t(z_t)`. The score and
//! Tweedie's posterior-mean formula are derived views of the same quantity.

mod analytic;
mod mlp;
mod train;

pub use analytic::AnalyticGaussianScore;
pub use mlp::{MlpConfig, MlpDenoiser};
pub use train::{train_dsm, TrainConfig, TrainReport};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, SoadError};
use crate::schedule::NoiseSchedule;

/// Batched noise predictor over flattened window states.
///
/// Rows of `z` are independent states sharing the diffusion time `t`.
/// Implementations must be deterministic for fixed inputs and parameters and
/// must not mutate any shared state during evaluation.
pub trait Denoiser: Send + Sync {
    /// Flattened window dimension.
    fn dim(&self) -> usize;

    /// Predicted noise, same shape as `z`.
    fn epsilon_batch(&self, z: &Array2<f64>, t: f64) -> Result<Array2<f64>>;

    /// Row-wise vector-Jacobian product `cot^T (d eps / d z)`.
    fn epsilon_vjp(&self, z: &Array2<f64>, t: f64, cotangent: &Array2<f64>) -> Result<Array2<f64>>;
}

fn check_rows(d: &dyn Denoiser, z: &Array2<f64>) -> Result<()> {
    if z.ncols() != d.dim() {
        return Err(SoadError::Shape(format!(
            "denoiser expects dimension {}, got rows of length {}",
            d.dim(),
            z.ncols()
        )));
    }
    Ok(())
}

/// Single-state noise prediction.
pub fn epsilon(d: &dyn Denoiser, z: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    let batch = z
        .to_owned()
        .into_shape_with_order((1, z.len()))
        .map_err(|e| SoadError::Shape(e.to_string()))?;
    check_rows(d, &batch)?;
    let out = d.epsilon_batch(&batch, t)?;
    Ok(out.row(0).to_owned())
}

/// Score estimate `s = -eps_hat / sigma_t`.
pub fn score(
    d: &dyn Denoiser,
    schedule: &NoiseSchedule,
    z: ArrayView1<f64>,
    t: f64,
) -> Result<Array1<f64>> {
    let (_, sigma) = schedule.mu_sigma(t)?;
    if sigma <= 0.0 {
        return Err(SoadError::Domain(format!(
            "sigma(t) = {sigma} at t = {t}; score undefined"
        )));
    }
    Ok(epsilon(d, z, t)? / -sigma)
}

/// Tweedie posterior mean `z0_hat = (z_t - sigma_t eps_hat) / mu_t`.
pub fn tweedie_mean(
    d: &dyn Denoiser,
    schedule: &NoiseSchedule,
    z: ArrayView1<f64>,
    t: f64,
) -> Result<Array1<f64>> {
    let (mu, sigma) = schedule.mu_sigma(t)?;
    if mu <= 0.0 {
        return Err(SoadError::Domain(format!(
            "mu(t) = {mu} at t = {t}; Tweedie mean undefined"
        )));
    }
    let eps = epsilon(d, z, t)?;
    Ok((&z.to_owned() - &(eps * sigma)) / mu)
}

/// Batched Tweedie posterior mean.
pub fn tweedie_mean_batch(
    d: &dyn Denoiser,
    schedule: &NoiseSchedule,
    z: &Array2<f64>,
    t: f64,
) -> Result<Array2<f64>> {
    let (mu, sigma) = schedule.mu_sigma(t)?;
    if mu <= 0.0 {
        return Err(SoadError::Domain(format!(
            "mu(t) = {mu} at t = {t}; Tweedie mean undefined"
        )));
    }
    check_rows(d, z)?;
    let eps = d.epsilon_batch(z, t)?;
    Ok((z - &(eps * sigma)) / mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_gaussian_posterior;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn standard_normal_is_vp_fixed_point() {
        // For data ~ N(0, I) under the variance-preserving schedule, the
        // marginal at every t is N(0, I) and eps_hat(z, t) = sigma_t z.
        let sched = NoiseSchedule::default();
        let d = AnalyticGaussianScore::new(Array1::zeros(3), ndarray::Array2::eye(3)).unwrap();
        let z = array![0.4, -1.2, 2.0];
        for &t in &[0.1, 0.35, 0.8] {
            let (_, sigma) = sched.mu_sigma(t).unwrap();
            let eps = epsilon(&d, z.view(), t).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(eps[i], sigma * z[i], epsilon = 1e-12);
            }
            let s = score(&d, &sched, z.view(), t).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(s[i], -z[i], epsilon = 1e-12);
            }
            // Tweedie under the vp identity 1 - sigma^2 = mu^2: z0_hat = mu z.
            let (mu, _) = sched.mu_sigma(t).unwrap();
            let tw = tweedie_mean(&d, &sched, z.view(), t).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(tw[i], mu * z[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_case() {
        let sched = NoiseSchedule::default();
        let m = array![1.0, -2.0];
        let d = AnalyticGaussianScore::new(m.clone(), ndarray::Array2::zeros((2, 2))).unwrap();
        let z = array![0.3, 0.7];
        let t = 0.4;
        let (mu, sigma) = sched.mu_sigma(t).unwrap();
        let eps = epsilon(&d, z.view(), t).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(eps[i], (z[i] - mu * m[i]) / sigma, epsilon = 1e-12);
        }
        let s = score(&d, &sched, z.view(), t).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(s[i], -(z[i] - mu * m[i]) / (sigma * sigma), epsilon = 1e-12);
        }
        // The posterior mean of a point mass is the point mass.
        let tw = tweedie_mean(&d, &sched, z.view(), t).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(tw[i], m[i], epsilon = 1e-10);
        }
    }

    /// For general Gaussian data, Tweedie's formula must recover the exact
    /// conditional mean E[z0 | z_t], checked against Gaussian conditioning:
    /// z_t = mu z0 + sigma eps is a linear observation of z0.
    #[test]
    fn tweedie_matches_exact_conditioning() {
        let sched = NoiseSchedule::default();
        let m = array![0.5, -0.3, 1.1];
        let c = array![[0.8, 0.2, 0.0], [0.2, 0.5, -0.1], [0.0, -0.1, 0.9]];
        let d = AnalyticGaussianScore::new(m.clone(), c.clone()).unwrap();
        let z_t = array![0.2, 0.9, -0.4];
        for &t in &[0.15, 0.5, 0.85] {
            let (mu, sigma) = sched.mu_sigma(t).unwrap();
            let obs = ndarray::Array2::eye(3) * mu;
            let r = ndarray::Array2::eye(3) * (sigma * sigma);
            let (cond_mean, _) =
                exact_gaussian_posterior(m.view(), c.view(), obs.view(), r.view(), z_t.view())
                    .unwrap();
            let tw = tweedie_mean(&d, &sched, z_t.view(), t).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(tw[i], cond_mean[i], epsilon = 1e-10);
            }
        }
    }

    /// Analytic score against central finite differences of the log marginal
    /// density, computed here with an independent matrix inverse.
    #[test]
    fn analytic_score_matches_finite_differences() {
        let sched = NoiseSchedule::default();
        let m = array![0.1, -0.2];
        let c = array![[0.6, 0.15], [0.15, 0.4]];
        let d = AnalyticGaussianScore::new(m.clone(), c.clone()).unwrap();
        let z = array![0.7, -0.9];
        let t = 0.45;
        let (mu, sigma) = sched.mu_sigma(t).unwrap();

        let cov_t = &c * (mu * mu) + &(ndarray::Array2::eye(2) * (sigma * sigma));
        let cov_inv = crate::linalg::from_na(
            &crate::linalg::to_na(cov_t.view()).try_inverse().unwrap(),
        );
        let log_p = |z: &ndarray::Array1<f64>| -> f64 {
            let r = z - &(&m * mu);
            -0.5 * r.dot(&cov_inv.dot(&r))
        };
        let s = score(&d, &sched, z.view(), t).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let fd = (log_p(&zp) - log_p(&zm)) / (2.0 * h);
            let rel = (s[i] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel <= 1e-5, "coordinate {i}: {} vs {fd}", s[i]);
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let d = AnalyticGaussianScore::new(Array1::zeros(3), ndarray::Array2::eye(3)).unwrap();
        let z = array![1.0, 2.0];
        assert!(matches!(
            epsilon(&d, z.view(), 0.5),
            Err(SoadError::Shape(_))
        ));
    }
}
