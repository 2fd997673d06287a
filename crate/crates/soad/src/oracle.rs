//! Independent ground-truth references used to verify the sampler and the
//! likelihood estimators: exact Gaussian conditioning, a Kalman filter with
//! RTS smoothing, and brute-force grid quadrature for low-dimensional
//! posteriors. Nothing in this module touches the diffusion code paths it is
//! used to check.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SoadError};
use crate::linalg::{from_na, from_na_vec, solve_spd, to_na, to_na_vec};

/// Time-invariant linear-Gaussian state-space model over a fixed window.
///
/// `observation[k]` may have zero rows to mark step `k` as unobserved;
/// `obs_noise[k]` must match its row count.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub transition: Array2<f64>,
    pub process_noise: Array2<f64>,
    pub observation: Vec<Array2<f64>>,
    pub obs_noise: Vec<Array2<f64>>,
    pub initial_mean: Array1<f64>,
    pub initial_cov: Array2<f64>,
}

impl LinearGaussianModel {
    pub fn window_len(&self) -> usize {
        self.observation.len()
    }

    pub fn state_dim(&self) -> usize {
        self.initial_mean.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.state_dim();
        if self.transition.dim() != (d, d) || self.process_noise.dim() != (d, d) {
            return Err(SoadError::Shape(
                "transition/process noise must be d x d".into(),
            ));
        }
        if self.observation.len() != self.obs_noise.len() {
            return Err(SoadError::Shape(
                "observation and obs_noise lists differ in length".into(),
            ));
        }
        for (h, r) in self.observation.iter().zip(&self.obs_noise) {
            if h.ncols() != d || r.dim() != (h.nrows(), h.nrows()) {
                return Err(SoadError::Shape(
                    "per-step observation matrix or noise has wrong shape".into(),
                ));
            }
        }
        Ok(())
    }

    /// Mean and covariance of the stacked window vector (x_0, ..., x_{K-1}).
    ///
    /// Cross-step blocks follow from repeated application of the transition:
    /// Cov(x_j, x_k) = P_jj (A^{k-j})^T for j <= k.
    pub fn stacked_prior(&self) -> (Array1<f64>, Array2<f64>) {
        let d = self.state_dim();
        let k = self.window_len();
        let a = to_na(self.transition.view());
        let q = to_na(self.process_noise.view());

        let mut means = vec![to_na_vec(self.initial_mean.view())];
        let mut diag = vec![to_na(self.initial_cov.view())];
        for step in 1..k {
            means.push(&a * &means[step - 1]);
            diag.push(&a * &diag[step - 1] * a.transpose() + &q);
        }

        let mut mean = Array1::zeros(d * k);
        for (step, m) in means.iter().enumerate() {
            for i in 0..d {
                mean[step * d + i] = m[i];
            }
        }

        let mut cov = DMatrix::zeros(d * k, d * k);
        for j in 0..k {
            // Walk forward from the diagonal block: C_{j,k+1} = C_{j,k} A^T.
            let mut block = diag[j].clone();
            for kk in j..k {
                for r in 0..d {
                    for c in 0..d {
                        cov[(j * d + r, kk * d + c)] = block[(r, c)];
                        cov[(kk * d + c, j * d + r)] = block[(r, c)];
                    }
                }
                block = &block * a.transpose();
            }
        }
        (mean, from_na(&cov))
    }
}

/// Posterior of `x ~ N(m, C)` given `y = T x + e`, `e ~ N(0, R)`.
///
/// An empty `T` (zero rows) returns the prior unchanged.
pub fn exact_gaussian_posterior(
    m: ArrayView1<f64>,
    c: ArrayView2<f64>,
    t: ArrayView2<f64>,
    r: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.len();
    if c.dim() != (n, n) || t.ncols() != n || y.len() != t.nrows() || r.dim() != (t.nrows(), t.nrows())
    {
        return Err(SoadError::Shape("exact_gaussian_posterior: inconsistent dimensions".into()));
    }
    if t.nrows() == 0 {
        return Ok((m.to_owned(), c.to_owned()));
    }
    let c_na = to_na(c);
    let t_na = to_na(t);
    let s = &t_na * &c_na * t_na.transpose() + to_na(r);
    let innov = to_na_vec(y) - &t_na * to_na_vec(m);
    // K^T = S^{-1} T C, so mean = m + (C T^T) S^{-1} innov.
    let ct = &c_na * t_na.transpose();
    let kt = solve_spd(&s, &(&t_na * &c_na))?;
    let mean = to_na_vec(m) + &ct * solve_spd(&s, &DMatrix::from_column_slice(innov.len(), 1, innov.as_slice()))?;
    let cov = &c_na - &ct * kt;
    let mean = Array1::from_iter(mean.column(0).iter().copied());
    Ok((mean, from_na(&cov)))
}

/// Rauch-Tung-Striebel smoother: per-step posterior means and covariances of
/// the window states given all observations in the window.
pub fn kalman_smoother(
    model: &LinearGaussianModel,
    observations: &[Array1<f64>],
) -> Result<Vec<(Array1<f64>, Array2<f64>)>> {
    model.validate()?;
    let k = model.window_len();
    if observations.len() != k {
        return Err(SoadError::Shape(format!(
            "expected {k} observation vectors, got {}",
            observations.len()
        )));
    }
    let a = to_na(model.transition.view());
    let q = to_na(model.process_noise.view());

    let mut pred_means = Vec::with_capacity(k);
    let mut pred_covs = Vec::with_capacity(k);
    let mut filt_means = Vec::with_capacity(k);
    let mut filt_covs = Vec::with_capacity(k);

    let mut m = to_na_vec(model.initial_mean.view());
    let mut p = to_na(model.initial_cov.view());
    for step in 0..k {
        if step > 0 {
            m = &a * &m;
            p = &a * &p * a.transpose() + &q;
        }
        pred_means.push(m.clone());
        pred_covs.push(p.clone());

        let h = to_na(model.observation[step].view());
        if h.nrows() > 0 {
            let y = to_na_vec(observations[step].view());
            if y.len() != h.nrows() {
                return Err(SoadError::Shape(format!(
                    "observation vector at step {step} has wrong length"
                )));
            }
            let r = to_na(model.obs_noise[step].view());
            let s = &h * &p * h.transpose() + r;
            let innov = y - &h * &m;
            let gain_t = solve_spd(&s, &(&h * &p))?; // S^{-1} H P = K^T
            m += gain_t.transpose() * innov;
            p = &p - gain_t.transpose() * &h * &p;
        }
        filt_means.push(m.clone());
        filt_covs.push(p.clone());
    }

    let mut sm_means = filt_means.clone();
    let mut sm_covs = filt_covs.clone();
    for step in (0..k.saturating_sub(1)).rev() {
        let p_pred_inv_ap = solve_spd(&pred_covs[step + 1], &(&a * &filt_covs[step]))?;
        let gain = p_pred_inv_ap.transpose(); // P_f A^T P_pred^{-1}
        sm_means[step] = &filt_means[step] + &gain * (&sm_means[step + 1] - &pred_means[step + 1]);
        sm_covs[step] = &filt_covs[step]
            + &gain * (&sm_covs[step + 1] - &pred_covs[step + 1]) * gain.transpose();
    }

    Ok(sm_means
        .into_iter()
        .zip(sm_covs)
        .map(|(m, p)| (from_na_vec(&m), from_na(&p)))
        .collect())
}

/// Regular grid over a low-dimensional box.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn coord(&self, axis: usize, index: usize) -> f64 {
        let n = self.points_per_axis;
        self.lo[axis] + (self.hi[axis] - self.lo[axis]) * index as f64 / (n - 1) as f64
    }

    fn cell_volume(&self) -> f64 {
        let n = (self.points_per_axis - 1) as f64;
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) / n)
            .product()
    }

    /// Trapezoid weight for a grid point (0.5 at each boundary per axis).
    fn weight(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| {
                if i == 0 || i == self.points_per_axis - 1 {
                    0.5
                } else {
                    1.0
                }
            })
            .product()
    }
}

/// Normalized posterior density tabulated on a grid, dimension <= 2.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    pub grid: GridSpec,
    /// Row-major density values, normalized to integrate to 1 under the
    /// trapezoid rule.
    pub density: Vec<f64>,
    /// Set when the estimated probability mass in the outermost grid shell
    /// exceeds 1e-6, i.e. the grid probably truncates the posterior.
    pub coverage_warning: bool,
}

impl PosteriorTable {
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.grid.dim();
        let mut mean = vec![0.0; dim];
        self.for_each(|idx, x, w, p| {
            let _ = idx;
            for d in 0..dim {
                mean[d] += w * p * x[d];
            }
        });
        let vol = self.grid.cell_volume();
        mean.iter_mut().for_each(|m| *m *= vol);
        mean
    }

    pub fn covariance(&self) -> Array2<f64> {
        let dim = self.grid.dim();
        let mean = self.mean();
        let mut cov = Array2::zeros((dim, dim));
        self.for_each(|_, x, w, p| {
            for a in 0..dim {
                for b in 0..dim {
                    cov[[a, b]] += w * p * (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        });
        cov *= self.grid.cell_volume();
        cov
    }

    fn for_each(&self, mut f: impl FnMut(&[usize], &[f64], f64, f64)) {
        let dim = self.grid.dim();
        let n = self.grid.points_per_axis;
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        for (flat, &p) in self.density.iter().enumerate() {
            let mut rem = flat;
            for d in (0..dim).rev() {
                idx[d] = rem % n;
                rem /= n;
            }
            for d in 0..dim {
                x[d] = self.grid.coord(d, idx[d]);
            }
            f(&idx, &x, self.grid.weight(&idx), p);
        }
    }
}

/// Tabulate the normalized posterior `exp(log_prior + log_lik)` on a grid.
///
/// Restricted to dimension <= 2; the grid should cover at least six prior
/// standard deviations per axis for the coverage check to stay quiet.
pub fn brute_force_posterior(
    log_prior: impl Fn(&[f64]) -> f64,
    log_lik: impl Fn(&[f64]) -> f64,
    grid: GridSpec,
) -> Result<PosteriorTable> {
    let dim = grid.dim();
    if dim == 0 || dim > 2 {
        return Err(SoadError::Input(format!(
            "brute_force_posterior supports dimensions 1-2, got {dim}"
        )));
    }
    if grid.hi.len() != dim || grid.points_per_axis < 8 {
        return Err(SoadError::Config("grid spec is degenerate".into()));
    }
    let n = grid.points_per_axis;
    let total = n.pow(dim as u32);
    let mut logs = vec![0.0; total];
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut max_log = f64::NEG_INFINITY;
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..dim).rev() {
            idx[d] = rem % n;
            rem /= n;
        }
        for d in 0..dim {
            x[d] = grid.coord(d, idx[d]);
        }
        let l = log_prior(&x) + log_lik(&x);
        logs[flat] = l;
        if l > max_log {
            max_log = l;
        }
    }
    let mut mass = 0.0;
    let mut boundary_mass = 0.0;
    let mut density = vec![0.0; total];
    for flat in 0..total {
        let mut rem = flat;
        let mut on_boundary = false;
        for d in (0..dim).rev() {
            idx[d] = rem % n;
            rem /= n;
            if idx[d] == 0 || idx[d] == n - 1 {
                on_boundary = true;
            }
        }
        let w = grid.weight(&idx);
        let p = (logs[flat] - max_log).exp();
        density[flat] = p;
        mass += w * p;
        if on_boundary {
            boundary_mass += w * p;
        }
    }
    let vol = grid.cell_volume();
    let norm = mass * vol;
    if !(norm.is_finite() && norm > 0.0) {
        return Err(SoadError::Numerical("posterior mass is zero or non-finite".into()));
    }
    density.iter_mut().for_each(|p| *p /= norm);
    Ok(PosteriorTable {
        coverage_warning: boundary_mass * vol / norm > 1e-6,
        grid,
        density,
    })
}

/// Streaming trapezoid-quadrature moments of an unnormalized log-density on a
/// regular grid, usable in up to ~5 dimensions (the grid is never stored).
/// Trapezoid sums converge spectrally for smooth, decaying integrands, so a
/// few dozen points per axis suffice for Gaussian-like densities.
pub fn quadrature_moments(
    log_density: impl Fn(&[f64]) -> f64,
    grid: &GridSpec,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let dim = grid.dim();
    let n = grid.points_per_axis;
    let total = n.checked_pow(dim as u32).ok_or_else(|| {
        SoadError::Config("quadrature grid too large".into())
    })?;

    // First pass: find the maximum for stable exponentiation.
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut max_log = f64::NEG_INFINITY;
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..dim).rev() {
            idx[d] = rem % n;
            rem /= n;
        }
        for d in 0..dim {
            x[d] = grid.coord(d, idx[d]);
        }
        max_log = max_log.max(log_density(&x));
    }

    let mut mass = 0.0;
    let mut mean = Array1::<f64>::zeros(dim);
    let mut second = Array2::<f64>::zeros((dim, dim));
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..dim).rev() {
            idx[d] = rem % n;
            rem /= n;
        }
        for d in 0..dim {
            x[d] = grid.coord(d, idx[d]);
        }
        let w = grid.weight(&idx) * (log_density(&x) - max_log).exp();
        mass += w;
        for a in 0..dim {
            mean[a] += w * x[a];
            for b in 0..dim {
                second[[a, b]] += w * x[a] * x[b];
            }
        }
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(SoadError::Numerical("quadrature mass is zero or non-finite".into()));
    }
    mean /= mass;
    second /= mass;
    for a in 0..dim {
        for b in 0..dim {
            second[[a, b]] -= mean[a] * mean[b];
        }
    }
    Ok((mean, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gaussian_log_density(m: &[f64], cov_inv: &Array2<f64>, x: &[f64]) -> f64 {
        let d = m.len();
        let mut q = 0.0;
        for a in 0..d {
            for b in 0..d {
                q += (x[a] - m[a]) * cov_inv[[a, b]] * (x[b] - m[b]);
            }
        }
        -0.5 * q
    }

    fn random_spd(rng: &mut ChaCha12Rng, d: usize, scale: f64) -> Array2<f64> {
        let a = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
        let mut c = a.t().dot(&a) * scale;
        for i in 0..d {
            c[[i, i]] += 0.3 * scale;
        }
        c
    }

    #[test]
    fn conjugate_scalar_update() {
        let (mean, cov) = exact_gaussian_posterior(
            array![0.0].view(),
            array![[1.0]].view(),
            array![[1.0]].view(),
            array![[1.0]].view(),
            array![1.0].view(),
        )
        .unwrap();
        assert_abs_diff_eq!(mean[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(cov[[0, 0]], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn empty_observation_returns_prior() {
        let m = array![1.0, 2.0];
        let c = array![[2.0, 0.3], [0.3, 1.0]];
        let t = Array2::<f64>::zeros((0, 2));
        let r = Array2::<f64>::zeros((0, 0));
        let y = Array1::<f64>::zeros(0);
        let (mean, cov) = exact_gaussian_posterior(m.view(), c.view(), t.view(), r.view(), y.view()).unwrap();
        assert_eq!(mean, m);
        assert_eq!(cov, c);
    }

    #[test]
    fn five_dim_instance_matches_quadrature() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let d = 5;
        let c = random_spd(&mut rng, d, 0.4);
        let m = Array1::from_shape_fn(d, |_| rng.random_range(-0.5..0.5));
        let t = Array2::from_shape_fn((3, d), |_| rng.random_range(-1.0..1.0));
        let r = Array2::from_diag(&array![0.3, 0.2, 0.25]);
        let y = Array1::from_shape_fn(3, |_| rng.random_range(-0.5..0.5));

        let (mean, cov) = exact_gaussian_posterior(m.view(), c.view(), t.view(), r.view(), y.view()).unwrap();

        let c_inv = crate::linalg::from_na(
            &crate::linalg::to_na(c.view()).try_inverse().unwrap(),
        );
        let r_inv = crate::linalg::from_na(
            &crate::linalg::to_na(r.view()).try_inverse().unwrap(),
        );
        let m_slice: Vec<f64> = m.to_vec();
        let log_post = |x: &[f64]| {
            let mut resid = vec![0.0; 3];
            for i in 0..3 {
                resid[i] = y[i] - (0..d).map(|j| t[[i, j]] * x[j]).sum::<f64>();
            }
            gaussian_log_density(&m_slice, &c_inv, x)
                + gaussian_log_density(&[0.0; 3], &r_inv, &resid)
        };

        // Box: posterior mean +/- 6 posterior stds per axis.
        let lo: Vec<f64> = (0..d).map(|i| mean[i] - 6.0 * cov[[i, i]].sqrt()).collect();
        let hi: Vec<f64> = (0..d).map(|i| mean[i] + 6.0 * cov[[i, i]].sqrt()).collect();
        let grid = GridSpec { lo, hi, points_per_axis: 27 };
        let (qmean, qcov) = quadrature_moments(log_post, &grid).unwrap();
        for i in 0..d {
            assert_abs_diff_eq!(qmean[i], mean[i], epsilon = 1e-3);
            for j in 0..d {
                assert_abs_diff_eq!(qcov[[i, j]], cov[[i, j]], epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn smoother_single_step_reduces_to_conditioning() {
        let model = LinearGaussianModel {
            transition: array![[0.8, 0.1], [0.0, 0.9]],
            process_noise: array![[0.1, 0.0], [0.0, 0.1]],
            observation: vec![array![[1.0, 0.0], [0.0, 1.0]]],
            obs_noise: vec![Array2::from_diag(&array![0.04, 0.04])],
            initial_mean: array![0.5, -0.5],
            initial_cov: array![[1.0, 0.2], [0.2, 0.8]],
        };
        let y = vec![array![0.3, 0.1]];
        let sm = kalman_smoother(&model, &y).unwrap();
        let (mean, cov) = exact_gaussian_posterior(
            model.initial_mean.view(),
            model.initial_cov.view(),
            model.observation[0].view(),
            model.obs_noise[0].view(),
            y[0].view(),
        )
        .unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(sm[0].0[i], mean[i], epsilon = 1e-12);
            for j in 0..2 {
                assert_abs_diff_eq!(sm[0].1[[i, j]], cov[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn smoother_zero_process_noise_propagates_final_state() {
        // With no process noise and full observations the window is a
        // deterministic function of x_0, so the smoothed mean at step 0 is
        // the final filtered mean pulled back through the dynamics.
        let a = array![[1.1, 0.0], [0.0, 0.5]];
        let model = LinearGaussianModel {
            transition: a.clone(),
            process_noise: Array2::zeros((2, 2)),
            observation: vec![Array2::eye(2); 3],
            obs_noise: vec![Array2::from_diag(&array![0.01, 0.01]); 3],
            initial_mean: array![1.0, 1.0],
            initial_cov: Array2::eye(2),
        };
        let ys = vec![array![1.0, 1.0], array![1.1, 0.5], array![1.21, 0.25]];
        let sm = kalman_smoother(&model, &ys).unwrap();
        let prop = a.dot(&a.dot(&sm[0].0));
        for i in 0..2 {
            assert_abs_diff_eq!(prop[i], sm[2].0[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn smoother_agrees_with_stacked_conditioning() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for trial in 0..5 {
            let d = 2;
            let k = 3;
            let model = LinearGaussianModel {
                transition: Array2::from_shape_fn((d, d), |_| rng.random_range(-0.7..0.7)),
                process_noise: random_spd(&mut rng, d, 0.2),
                observation: (0..k)
                    .map(|step| {
                        if step == 1 {
                            Array2::zeros((0, d)) // unobserved middle step
                        } else {
                            Array2::from_shape_fn((1, d), |_| rng.random_range(-1.0..1.0))
                        }
                    })
                    .collect(),
                obs_noise: (0..k)
                    .map(|step| {
                        if step == 1 {
                            Array2::zeros((0, 0))
                        } else {
                            array![[0.05]]
                        }
                    })
                    .collect(),
                initial_mean: Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0)),
                initial_cov: random_spd(&mut rng, d, 0.5),
            };
            let ys: Vec<Array1<f64>> = model
                .observation
                .iter()
                .map(|h| Array1::from_shape_fn(h.nrows(), |_| rng.random_range(-1.0..1.0)))
                .collect();

            let sm = kalman_smoother(&model, &ys).unwrap();

            let (pm, pc) = model.stacked_prior();
            // Stack the observation operator over the window.
            let rows: usize = model.observation.iter().map(|h| h.nrows()).sum();
            let mut t = Array2::zeros((rows, d * k));
            let mut r = Array2::zeros((rows, rows));
            let mut y = Array1::zeros(rows);
            let mut row = 0;
            for step in 0..k {
                let h = &model.observation[step];
                for i in 0..h.nrows() {
                    for j in 0..d {
                        t[[row, step * d + j]] = h[[i, j]];
                    }
                    r[[row, row]] = model.obs_noise[step][[i, i]];
                    y[row] = ys[step][i];
                    row += 1;
                }
            }
            let (mean, cov) = exact_gaussian_posterior(pm.view(), pc.view(), t.view(), r.view(), y.view()).unwrap();
            for step in 0..k {
                for i in 0..d {
                    assert_abs_diff_eq!(sm[step].0[i], mean[step * d + i], epsilon = 1e-8);
                    for j in 0..d {
                        assert_abs_diff_eq!(
                            sm[step].1[[i, j]],
                            cov[[step * d + i, step * d + j]],
                            epsilon = 1e-8,
                        );
                    }
                }
            }
            let _ = trial;
        }
    }

    #[test]
    fn brute_force_gaussian_matches_exact() {
        let m = array![0.2, -0.1];
        let c = array![[0.5, 0.1], [0.1, 0.4]];
        let t = array![[1.0, 0.5]];
        let r = array![[0.09]];
        let y = array![0.4];
        let (mean, cov) = exact_gaussian_posterior(m.view(), c.view(), t.view(), r.view(), y.view()).unwrap();

        let c_inv = crate::linalg::from_na(&crate::linalg::to_na(c.view()).try_inverse().unwrap());
        let table = brute_force_posterior(
            |x| gaussian_log_density(&[0.2, -0.1], &c_inv, x),
            |x| {
                let resid = y[0] - (t[[0, 0]] * x[0] + t[[0, 1]] * x[1]);
                -0.5 * resid * resid / r[[0, 0]]
            },
            GridSpec {
                lo: vec![mean[0] - 6.0 * cov[[0, 0]].sqrt(), mean[1] - 6.0 * cov[[1, 1]].sqrt()],
                hi: vec![mean[0] + 6.0 * cov[[0, 0]].sqrt(), mean[1] + 6.0 * cov[[1, 1]].sqrt()],
                points_per_axis: 512,
            },
        )
        .unwrap();
        assert!(!table.coverage_warning);
        let bm = table.mean();
        let bc = table.covariance();
        for i in 0..2 {
            assert_abs_diff_eq!(bm[i], mean[i], epsilon = 1e-4);
            for j in 0..2 {
                assert_abs_diff_eq!(bc[[i, j]], cov[[i, j]], epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn brute_force_flat_likelihood_recovers_prior() {
        let table = brute_force_posterior(
            |x| -0.5 * x[0] * x[0],
            |_| 0.0,
            GridSpec { lo: vec![-7.0], hi: vec![7.0], points_per_axis: 512 },
        )
        .unwrap();
        assert!(!table.coverage_warning);
        let m = table.mean();
        let c = table.covariance();
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c[[0, 0]], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn brute_force_arctan_observation_reference() {
        // Nonlinear 1-d reference: x ~ N(0,1), y = arctan(3x) + e, e ~ N(0, 0.1^2).
        let y = 0.8;
        let table = brute_force_posterior(
            |x| -0.5 * x[0] * x[0],
            |x| {
                let resid = y - (3.0 * x[0]).atan();
                -0.5 * resid * resid / 0.01
            },
            GridSpec { lo: vec![-7.0], hi: vec![7.0], points_per_axis: 2048 },
        )
        .unwrap();
        assert!(!table.coverage_warning);
        let m = table.mean()[0];
        // Posterior should concentrate near tan(0.8)/3 ~= 0.3433.
        let anchor = (0.8_f64).tan() / 3.0;
        assert!((m - anchor).abs() < 0.05, "mean {m} vs anchor {anchor}");
        // Doubling the resolution moves the moments by < 1e-4.
        let finer = brute_force_posterior(
            |x| -0.5 * x[0] * x[0],
            |x| {
                let resid = y - (3.0 * x[0]).atan();
                -0.5 * resid * resid / 0.01
            },
            GridSpec { lo: vec![-7.0], hi: vec![7.0], points_per_axis: 4096 },
        )
        .unwrap();
        assert!((finer.mean()[0] - m).abs() < 1e-4);
        assert!((finer.covariance()[[0, 0]] - table.covariance()[[0, 0]]).abs() < 1e-4);
    }

    #[test]
    fn coverage_warning_fires_on_truncated_grid() {
        let table = brute_force_posterior(
            |x| -0.5 * x[0] * x[0],
            |_| 0.0,
            GridSpec { lo: vec![-1.0], hi: vec![1.0], points_per_axis: 64 },
        )
        .unwrap();
        assert!(table.coverage_warning);
    }
}
