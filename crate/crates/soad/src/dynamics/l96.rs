//! Lorenz-96 integrator. The cyclic chaotic ODE standard in assimilation
//! benchmarking; serves as the primary desk-scale ground truth.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Result, SoadError};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Lorenz96Config {
    pub dimension: usize,
    pub forcing: f64,
    /// RK4 inner step.
    pub dt_integrate: f64,
    /// Spacing between stored snapshots.
    pub dt_snapshot: f64,
    /// Snapshots discarded before recording starts.
    pub warmup_snapshots: usize,
}

impl Default for Lorenz96Config {
    fn default() -> Self {
        Self {
            dimension: 40,
            forcing: 8.0,
            dt_integrate: 0.005,
            dt_snapshot: 0.1,
            warmup_snapshots: 200,
        }
    }
}

impl Lorenz96Config {
    fn validate(&self) -> Result<()> {
        if self.dimension < 4 {
            return Err(SoadError::Config(
                "Lorenz-96 needs dimension >= 4".into(),
            ));
        }
        if !(self.dt_integrate > 0.0 && self.dt_snapshot >= self.dt_integrate) {
            return Err(SoadError::Config(
                "need 0 < dt_integrate <= dt_snapshot".into(),
            ));
        }
        Ok(())
    }
}

/// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.
pub fn l96_rhs(x: ArrayView1<f64>, forcing: f64) -> Array1<f64> {
    let d = x.len();
    Array1::from_shape_fn(d, |i| {
        let ip1 = x[(i + 1) % d];
        let im1 = x[(i + d - 1) % d];
        let im2 = x[(i + d - 2) % d];
        (ip1 - im2) * im1 - x[i] + forcing
    })
}

fn rk4_step(x: &Array1<f64>, dt: f64, forcing: f64) -> Array1<f64> {
    let k1 = l96_rhs(x.view(), forcing);
    let k2 = l96_rhs((x + &(&k1 * (dt / 2.0))).view(), forcing);
    let k3 = l96_rhs((x + &(&k2 * (dt / 2.0))).view(), forcing);
    let k4 = l96_rhs((x + &(&k3 * dt)).view(), forcing);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// A randomly perturbed rest state near the attractor basin.
pub fn l96_random_init(cfg: &Lorenz96Config, seed: u64) -> Array1<f64> {
    let mut rng = substream(seed, &[0x4c39_36]);
    Array1::from_shape_fn(cfg.dimension, |_| {
        cfg.forcing + 0.5 * rng.random_range(-1.0..1.0)
    })
}

/// Integrate from `x0`, discarding the warmup, and return `num_snapshots`
/// states spaced by `dt_snapshot` (the first one right after warmup).
pub fn integrate_l96(
    cfg: &Lorenz96Config,
    x0: ArrayView1<f64>,
    num_snapshots: usize,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if x0.len() != cfg.dimension {
        return Err(SoadError::Shape(format!(
            "x0 has length {}, config says {}",
            x0.len(),
            cfg.dimension
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SoadError::Input("non-finite initial state".into()));
    }
    let substeps = (cfg.dt_snapshot / cfg.dt_integrate).round().max(1.0) as usize;
    let mut x = x0.to_owned();
    let mut out = Array2::zeros((num_snapshots, cfg.dimension));
    let total = cfg.warmup_snapshots + num_snapshots;
    for snap in 0..total {
        if snap >= cfg.warmup_snapshots {
            out.row_mut(snap - cfg.warmup_snapshots).assign(&x);
        }
        if snap + 1 == total {
            break;
        }
        for _ in 0..substeps {
            x = rk4_step(&x, cfg.dt_integrate, cfg.forcing);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SoadError::Numerical(format!(
                "Lorenz-96 blow-up after snapshot step {snap}"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_at_constant_forcing() {
        let x = Array1::from_elem(8, 8.0);
        let dx = l96_rhs(x.view(), 8.0);
        for v in dx.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_state_gives_pure_forcing() {
        let x = Array1::zeros(6);
        let dx = l96_rhs(x.view(), 8.0);
        for v in dx.iter() {
            assert_abs_diff_eq!(*v, 8.0, epsilon = 1e-14);
        }
    }

    /// Independent scalar evaluation of the formula for a state with a
    /// single perturbed coordinate.
    #[test]
    fn single_perturbation_matches_bruteforce() {
        let d = 7;
        let f = 8.0;
        let mut x = Array1::from_elem(d, 1.0);
        x[3] = 2.5;
        let dx = l96_rhs(x.view(), f);
        for i in 0..d {
            let ip1 = x[(i + 1) % d];
            let im1 = x[(i + d - 1) % d];
            let im2 = x[(i + d - 2) % d];
            let expected = (ip1 - im2) * im1 - x[i] + f;
            assert_abs_diff_eq!(dx[i], expected, epsilon = 1e-14);
        }
    }

    /// Self-convergence: halving dt reduces the end-state error by ~2^4.
    #[test]
    fn rk4_fourth_order_convergence() {
        let cfg = Lorenz96Config {
            dimension: 8,
            warmup_snapshots: 0,
            ..Default::default()
        };
        let x0 = l96_random_init(&cfg, 3);
        let run = |dt: f64| {
            let mut x = x0.clone();
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                x = rk4_step(&x, dt, cfg.forcing);
            }
            x
        };
        let reference = run(0.04 / 8.0);
        let err = |x: &Array1<f64>| {
            (x - &reference).iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let e1 = err(&run(0.04));
        let e2 = err(&run(0.02));
        let ratio = e1 / e2;
        assert!(
            (10.0..24.0).contains(&ratio),
            "convergence ratio {ratio} not ~16"
        );
    }

    /// Empirical attractor envelope: trajectories stay well inside |x| < 25.
    #[test]
    fn long_run_stays_bounded() {
        let cfg = Lorenz96Config {
            dimension: 40,
            dt_snapshot: 0.05,
            dt_integrate: 0.005,
            warmup_snapshots: 0,
            ..Default::default()
        };
        let x0 = l96_random_init(&cfg, 9);
        let traj = integrate_l96(&cfg, x0.view(), 10_000).unwrap();
        let max = traj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 25.0, "max |x_i| = {max}");
        assert!(max > 5.0, "trajectory suspiciously flat");
    }
}
