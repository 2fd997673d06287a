//! Closed-form denoiser for Gaussian data, used as the verification oracle
//! for the trainable network and as the exact prior in the linear-Gaussian
//! acceptance benchmarks.
//!
//! For data ~ N(m, C) the marginal at diffusion time t is
//! N(mu_t m, mu_t^2 C + sigma_t^2 I), so
//! eps_hat(z, t) = sigma_t (mu_t^2 C + sigma_t^2 I)^{-1} (z - mu_t m)
//! exactly. The covariance is eigendecomposed once; every per-t solve is a
//! diagonal rescaling in the eigenbasis, which also handles singular C.

use ndarray::{Array1, Array2};

use crate::denoise::Denoiser;
use crate::error::{Result, SoadError};
use crate::linalg::sym_eigen;
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone)]
pub struct AnalyticGaussianScore {
    mean: Array1<f64>,
    eigvecs: Array2<f64>,
    eigvals: Array1<f64>,
    schedule: NoiseSchedule,
}

impl AnalyticGaussianScore {
    pub fn new(mean: Array1<f64>, covariance: Array2<f64>) -> Result<Self> {
        Self::with_schedule(mean, covariance, NoiseSchedule::default())
    }

    pub fn with_schedule(
        mean: Array1<f64>,
        covariance: Array2<f64>,
        schedule: NoiseSchedule,
    ) -> Result<Self> {
        let n = mean.len();
        if covariance.dim() != (n, n) {
            return Err(SoadError::Shape(format!(
                "covariance must be {n} x {n}, got {:?}",
                covariance.dim()
            )));
        }
        let scale = covariance.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (covariance[[i, j]] - covariance[[j, i]]).abs() > 1e-9 * scale {
                    return Err(SoadError::Input("covariance is not symmetric".into()));
                }
            }
        }
        let (eigvecs, mut eigvals) = sym_eigen(covariance.view());
        for v in eigvals.iter_mut() {
            if *v < -1e-8 * scale {
                return Err(SoadError::Input(
                    "covariance is not positive semi-definite".into(),
                ));
            }
            *v = v.max(0.0);
        }
        Ok(Self { mean, eigvecs, eigvals, schedule })
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// Eigen-pairs of the data covariance (shared with the exact estimator).
    pub fn covariance_eigen(&self) -> (&Array2<f64>, &Array1<f64>) {
        (&self.eigvecs, &self.eigvals)
    }

    /// Apply (mu^2 C + sigma^2 I)^{-1} to each row of `x`.
    fn precision_apply(&self, x: &Array2<f64>, mu: f64, sigma: f64) -> Array2<f64> {
        let in_basis = x.dot(&self.eigvecs); // rows in eigen coordinates
        let mut scaled = in_basis;
        for (mut col, &lam) in scaled.columns_mut().into_iter().zip(self.eigvals.iter()) {
            let denom = mu * mu * lam + sigma * sigma;
            col.mapv_inplace(|v| v / denom);
        }
        scaled.dot(&self.eigvecs.t())
    }
}

impl Denoiser for AnalyticGaussianScore {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn epsilon_batch(&self, z: &Array2<f64>, t: f64) -> Result<Array2<f64>> {
        if z.ncols() != self.dim() {
            return Err(SoadError::Shape(format!(
                "expected rows of length {}, got {}",
                self.dim(),
                z.ncols()
            )));
        }
        let (mu, sigma) = self.schedule.mu_sigma(t)?;
        let centered = z - &self
            .mean
            .view()
            .insert_axis(ndarray::Axis(0))
            .mapv(|v| v * mu);
        Ok(self.precision_apply(&centered, mu, sigma) * sigma)
    }

    fn epsilon_vjp(&self, z: &Array2<f64>, t: f64, cotangent: &Array2<f64>) -> Result<Array2<f64>> {
        if cotangent.dim() != z.dim() {
            return Err(SoadError::Shape("cotangent shape mismatch".into()));
        }
        let (mu, sigma) = self.schedule.mu_sigma(t)?;
        // The Jacobian sigma (mu^2 C + sigma^2 I)^{-1} is symmetric.
        Ok(self.precision_apply(cotangent, mu, sigma) * sigma)
    }
}
