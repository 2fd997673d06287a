//! Two-layer quasi-geostrophic dynamics on a doubly periodic square grid,
//! stepped pseudo-spectrally, plus the vorticity-to-velocity observation
//! kernel backed by the same spectral inversion.
//!
//! The potential vorticity / stream function relation per layer is
//!   q1 = lap(psi1) + F1 (psi2 - psi1),
//!   q2 = lap(psi2) + F2 (psi1 - psi2),
//! inverted wavenumber-by-wavenumber through a 2x2 linear solve. Time
//! stepping is third-order Adams-Bashforth (Euler, then AB2 startup) with an
//! exponential spectral cutoff filter standing in for the small-scale
//! dissipation term.

use ndarray::{Array2, Array3, Array4, ArrayView3};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Result, SoadError};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QgConfig {
    pub grid_side: usize,
    /// Square domain edge length (m).
    pub domain: f64,
    /// Linear drag coefficient acting on the lower layer (1/s).
    pub r_ek: f64,
    /// Amplitude parameter of the exponential spectral filter.
    pub filter_amp: f64,
    /// Gravity (recorded alongside the stratification parameters; the
    /// deformation radius below already encodes the reduced gravity).
    pub gravity: f64,
    /// Planetary vorticity gradient (1/(m s)).
    pub beta: f64,
    /// Deformation radius (m).
    pub r_d: f64,
    /// Layer thicknesses (m).
    pub h1: f64,
    pub h2: f64,
    /// Background zonal flow per layer (m/s).
    pub u1: f64,
    pub u2: f64,
    /// Time step (s).
    pub dt: f64,
    /// Steps between stored snapshots.
    pub snapshot_every: usize,
    /// Snapshots discarded before recording starts.
    pub warmup_snapshots: usize,
}

impl Default for QgConfig {
    fn default() -> Self {
        Self {
            grid_side: 32,
            domain: 1e6,
            r_ek: 5.767e-7,
            filter_amp: 23.6,
            gravity: 9.81,
            beta: 1.5e-11,
            r_d: 1.5e4,
            h1: 500.0,
            h2: 2000.0,
            u1: 0.025,
            u2: 0.0,
            dt: 7200.0,
            snapshot_every: 12,
            warmup_snapshots: 40,
        }
    }
}

impl QgConfig {
    /// Layer coupling coefficients from the deformation radius and the
    /// thickness ratio: F1 = r_d^-2 / (1 + H1/H2), F2 = (H1/H2) F1.
    pub fn f1(&self) -> f64 {
        (1.0 / (self.r_d * self.r_d)) / (1.0 + self.h1 / self.h2)
    }

    pub fn f2(&self) -> f64 {
        (self.h1 / self.h2) * self.f1()
    }

    pub fn beta1(&self) -> f64 {
        self.beta + self.f1() * (self.u1 - self.u2)
    }

    pub fn beta2(&self) -> f64 {
        self.beta - self.f2() * (self.u1 - self.u2)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side < 4 || self.grid_side % 2 != 0 {
            return Err(SoadError::Config("grid side must be even and >= 4".into()));
        }
        if !(self.domain > 0.0 && self.r_d > 0.0 && self.h1 > 0.0 && self.h2 > 0.0 && self.dt > 0.0)
        {
            return Err(SoadError::Config("QG physical parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Planned 2-D FFT pair on an n x n complex grid.
struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed physical wavenumbers 2 pi m / L.
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Spectral {
    fn new(n: usize, domain: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let wavenumber = |m: usize| {
            let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * std::f64::consts::PI * signed / domain
        };
        let kx = (0..n).map(wavenumber).collect();
        let ky = (0..n).map(wavenumber).collect();
        Self { n, fwd, inv, kx, ky }
    }

    fn fft2(&self, field: &mut Array2<Complex64>) {
        let n = self.n;
        for mut row in field.rows_mut() {
            self.fwd.process(row.as_slice_mut().expect("contiguous row"));
        }
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = field[[i, j]];
            }
            self.fwd.process(&mut col);
            for i in 0..n {
                field[[i, j]] = col[i];
            }
        }
    }

    fn ifft2(&self, field: &mut Array2<Complex64>) {
        let n = self.n;
        let norm = 1.0 / (n * n) as f64;
        for mut row in field.rows_mut() {
            self.inv.process(row.as_slice_mut().expect("contiguous row"));
        }
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = field[[i, j]];
            }
            self.inv.process(&mut col);
            for i in 0..n {
                field[[i, j]] = col[i] * norm;
            }
        }
    }

    fn to_spectral(&self, real: &Array2<f64>) -> Array2<Complex64> {
        let mut c = real.mapv(|v| Complex64::new(v, 0.0));
        self.fft2(&mut c);
        c
    }

    fn to_real(&self, mut spec: Array2<Complex64>) -> Array2<f64> {
        self.ifft2(&mut spec);
        spec.mapv(|v| v.re)
    }

    /// lambda^2 = kx^2 + ky^2 at (row i = y index, col j = x index).
    fn kappa2(&self, i: usize, j: usize) -> f64 {
        self.kx[j] * self.kx[j] + self.ky[i] * self.ky[i]
    }
}

/// Exponential cutoff filter, unity below 0.65 pi in grid-scaled wavenumber.
fn build_filter(cfg: &QgConfig, sp: &Spectral) -> Array2<f64> {
    let n = cfg.grid_side;
    let dx = cfg.domain / n as f64;
    let cutoff = 0.65 * std::f64::consts::PI;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let wv = ((sp.kx[j] * dx).powi(2) + (sp.ky[i] * dx).powi(2)).sqrt();
        if wv > cutoff {
            (-cfg.filter_amp * (wv - cutoff).powi(4)).exp()
        } else {
            1.0
        }
    })
}

/// Invert potential vorticity to stream functions, one 2x2 solve per
/// wavenumber; the (0,0) mode of psi is set to zero.
fn invert_pv(
    cfg: &QgConfig,
    sp: &Spectral,
    qh: &[Array2<Complex64>; 2],
) -> [Array2<Complex64>; 2] {
    let n = cfg.grid_side;
    let (f1, f2) = (cfg.f1(), cfg.f2());
    let mut p1 = Array2::default((n, n));
    let mut p2 = Array2::default((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == 0 && j == 0 {
                continue;
            }
            let k2 = sp.kappa2(i, j);
            // [ -(k2+F1)   F1      ] [psi1]   [q1]
            // [  F2       -(k2+F2) ] [psi2] = [q2]
            let det = k2 * k2 + k2 * (f1 + f2);
            let a = -(k2 + f2) / det;
            let b = -f1 / det;
            let c = -f2 / det;
            let d = -(k2 + f1) / det;
            p1[[i, j]] = qh[0][[i, j]] * a + qh[1][[i, j]] * b;
            p2[[i, j]] = qh[0][[i, j]] * c + qh[1][[i, j]] * d;
        }
    }
    [p1, p2]
}

fn deriv_x(sp: &Spectral, fh: &Array2<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn(fh.dim(), |(i, j)| {
        fh[[i, j]] * Complex64::new(0.0, sp.kx[j])
    })
}

fn deriv_y(sp: &Spectral, fh: &Array2<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn(fh.dim(), |(i, j)| {
        fh[[i, j]] * Complex64::new(0.0, sp.ky[i])
    })
}

/// Spectral tendency of (q1h, q2h).
fn tendency(
    cfg: &QgConfig,
    sp: &Spectral,
    qh: &[Array2<Complex64>; 2],
) -> [Array2<Complex64>; 2] {
    let psih = invert_pv(cfg, sp, qh);
    let betas = [cfg.beta1(), cfg.beta2()];
    let us = [cfg.u1, cfg.u2];
    let mut out: [Array2<Complex64>; 2] = [
        Array2::default(qh[0].dim()),
        Array2::default(qh[0].dim()),
    ];
    for layer in 0..2 {
        let psi_x = sp.to_real(deriv_x(sp, &psih[layer]));
        let psi_y = sp.to_real(deriv_y(sp, &psih[layer]));
        let q_x = sp.to_real(deriv_x(sp, &qh[layer]));
        let q_y = sp.to_real(deriv_y(sp, &qh[layer]));
        // J(psi, q) + U dq/dx in physical space.
        let advection = Array2::from_shape_fn(psi_x.dim(), |(i, j)| {
            psi_x[[i, j]] * q_y[[i, j]] - psi_y[[i, j]] * q_x[[i, j]] + us[layer] * q_x[[i, j]]
        });
        let adv_h = sp.to_spectral(&advection);
        let mut dq = Array2::from_shape_fn(qh[layer].dim(), |(i, j)| {
            -adv_h[[i, j]] - psih[layer][[i, j]] * Complex64::new(0.0, betas[layer] * sp.kx[j])
        });
        if layer == 1 {
            // Bottom drag: -r_ek lap(psi2) => +r_ek kappa^2 psi2h.
            for i in 0..cfg.grid_side {
                for j in 0..cfg.grid_side {
                    dq[[i, j]] += psih[1][[i, j]] * (cfg.r_ek * sp.kappa2(i, j));
                }
            }
        }
        out[layer] = dq;
    }
    out
}

/// Integrate the two-layer model from `q0` (shape (2, n, n)), returning
/// `num_snapshots` states of the same shape spaced by
/// `snapshot_every * dt`, after discarding the warmup.
pub fn integrate_qg(
    cfg: &QgConfig,
    q0: ArrayView3<f64>,
    num_snapshots: usize,
) -> Result<Array4<f64>> {
    cfg.validate()?;
    let n = cfg.grid_side;
    if q0.dim() != (2, n, n) {
        return Err(SoadError::Shape(format!(
            "q0 must have shape (2, {n}, {n}), got {:?}",
            q0.dim()
        )));
    }
    if q0.iter().any(|v| !v.is_finite()) {
        return Err(SoadError::Input("non-finite initial vorticity".into()));
    }
    let sp = Spectral::new(n, cfg.domain);
    let filter = build_filter(cfg, &sp);

    let mut qh = [
        sp.to_spectral(&q0.index_axis(ndarray::Axis(0), 0).to_owned()),
        sp.to_spectral(&q0.index_axis(ndarray::Axis(0), 1).to_owned()),
    ];
    let mut history: Vec<[Array2<Complex64>; 2]> = Vec::new();

    let mut out = Array4::zeros((num_snapshots, 2, n, n));
    let total = cfg.warmup_snapshots + num_snapshots;
    let mut recorded = 0;
    for snap in 0..total {
        if snap >= cfg.warmup_snapshots {
            for layer in 0..2 {
                let real = sp.to_real(qh[layer].clone());
                if real.iter().any(|v| !v.is_finite()) {
                    return Err(SoadError::Numerical(format!(
                        "QG blow-up at snapshot step {snap}"
                    )));
                }
                out.index_axis_mut(ndarray::Axis(0), recorded)
                    .index_axis_mut(ndarray::Axis(0), layer)
                    .assign(&real);
            }
            recorded += 1;
        }
        if snap + 1 == total {
            break;
        }
        for _ in 0..cfg.snapshot_every {
            let f_now = tendency(cfg, &sp, &qh);
            let dt = cfg.dt;
            let update: [Array2<Complex64>; 2] = match history.len() {
                0 => [f_now[0].mapv(|v| v * dt), f_now[1].mapv(|v| v * dt)],
                1 => {
                    let fm1 = &history[0];
                    [
                        Array2::from_shape_fn(qh[0].dim(), |idx| {
                            (f_now[0][idx] * 1.5 - fm1[0][idx] * 0.5) * dt
                        }),
                        Array2::from_shape_fn(qh[0].dim(), |idx| {
                            (f_now[1][idx] * 1.5 - fm1[1][idx] * 0.5) * dt
                        }),
                    ]
                }
                _ => {
                    let fm1 = &history[history.len() - 1];
                    let fm2 = &history[history.len() - 2];
                    let (c0, c1, c2) = (23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0);
                    [
                        Array2::from_shape_fn(qh[0].dim(), |idx| {
                            (f_now[0][idx] * c0 + fm1[0][idx] * c1 + fm2[0][idx] * c2) * dt
                        }),
                        Array2::from_shape_fn(qh[0].dim(), |idx| {
                            (f_now[1][idx] * c0 + fm1[1][idx] * c1 + fm2[1][idx] * c2) * dt
                        }),
                    ]
                }
            };
            for layer in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        qh[layer][[i, j]] = (qh[layer][[i, j]] + update[layer][[i, j]])
                            * filter[[i, j]];
                    }
                }
            }
            if history.len() == 2 {
                history.remove(0);
            }
            history.push(f_now);
        }
    }
    Ok(out)
}

/// Random smooth initial vorticity with the requested standard deviation.
pub fn qg_random_init(cfg: &QgConfig, seed: u64, amplitude: f64) -> Array3<f64> {
    use rand::Rng;
    let n = cfg.grid_side;
    let sp = Spectral::new(n, cfg.domain);
    let mut rng = substream(seed, &[0x5147]);
    let mut out = Array3::zeros((2, n, n));
    let k0 = 2.0 * std::f64::consts::PI * 4.0 / cfg.domain; // peak near mode 4
    for layer in 0..2 {
        let white = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let mut wh = sp.to_spectral(&white);
        for i in 0..n {
            for j in 0..n {
                let k2 = sp.kappa2(i, j);
                let envelope = (-(k2 / (k0 * k0))).exp() * k2.sqrt();
                wh[[i, j]] *= envelope;
            }
        }
        wh[[0, 0]] = Complex64::new(0.0, 0.0);
        let real = sp.to_real(wh);
        let std = real.iter().map(|v| v * v).sum::<f64>().sqrt() / (n as f64);
        let scale = if std > 0.0 { amplitude / std } else { 0.0 };
        out.index_axis_mut(ndarray::Axis(0), layer)
            .assign(&real.mapv(|v| v * scale));
    }
    out
}

/// Vorticity-to-velocity map: invert PV to stream functions in spectral
/// space, then u = -d psi/dy, v = d psi/dx. Output channel order is
/// (u1, v1, u2, v2).
pub fn vort2vel(q: ArrayView3<f64>, cfg: &QgConfig) -> Result<Array3<f64>> {
    let n = cfg.grid_side;
    if q.dim() != (2, n, n) {
        return Err(SoadError::Shape(format!(
            "vort2vel expects (2, {n}, {n}), got {:?}",
            q.dim()
        )));
    }
    let sp = Spectral::new(n, cfg.domain);
    let qh = [
        sp.to_spectral(&q.index_axis(ndarray::Axis(0), 0).to_owned()),
        sp.to_spectral(&q.index_axis(ndarray::Axis(0), 1).to_owned()),
    ];
    let psih = invert_pv(cfg, &sp, &qh);
    let mut out = Array3::zeros((4, n, n));
    for layer in 0..2 {
        let u = sp.to_real(deriv_y(&sp, &psih[layer]).mapv(|v| -v));
        let v = sp.to_real(deriv_x(&sp, &psih[layer]));
        out.index_axis_mut(ndarray::Axis(0), 2 * layer).assign(&u);
        out.index_axis_mut(ndarray::Axis(0), 2 * layer + 1).assign(&v);
    }
    Ok(out)
}

/// Adjoint of [`vort2vel`] with respect to the grid inner product. The map is
/// a composition of Fourier multipliers, so the adjoint conjugates each
/// multiplier: cot_q = IFFT(conj(M)(k) FFT(cot_uv)).
pub fn vort2vel_adjoint(cot: ArrayView3<f64>, cfg: &QgConfig) -> Result<Array3<f64>> {
    let n = cfg.grid_side;
    if cot.dim() != (4, n, n) {
        return Err(SoadError::Shape(format!(
            "vort2vel_adjoint expects (4, {n}, {n}), got {:?}",
            cot.dim()
        )));
    }
    let sp = Spectral::new(n, cfg.domain);
    let (f1, f2) = (cfg.f1(), cfg.f2());
    let coth: Vec<Array2<Complex64>> = (0..4)
        .map(|c| sp.to_spectral(&cot.index_axis(ndarray::Axis(0), c).to_owned()))
        .collect();
    let mut out = Array3::zeros((2, n, n));
    for q_layer in 0..2 {
        let mut acc: Array2<Complex64> = Array2::default((n, n));
        for i in 0..n {
            for j in 0..n {
                if i == 0 && j == 0 {
                    continue;
                }
                let k2 = sp.kappa2(i, j);
                let det = k2 * k2 + k2 * (f1 + f2);
                // Column q_layer of the PV inverse (real symmetric blocks).
                let minv = [
                    [-(k2 + f2) / det, -f1 / det],
                    [-f2 / det, -(k2 + f1) / det],
                ];
                let mut sum = Complex64::default();
                for psi_layer in 0..2 {
                    let w = minv[psi_layer][q_layer];
                    // u = -i ky psi, v = i kx psi; adjoint conjugates the factor.
                    let du = Complex64::new(0.0, sp.ky[i]); // conj(-i ky)
                    let dv = Complex64::new(0.0, -sp.kx[j]); // conj(i kx)
                    sum += coth[2 * psi_layer][[i, j]] * du * w
                        + coth[2 * psi_layer + 1][[i, j]] * dv * w;
                }
                acc[[i, j]] = sum;
            }
        }
        out.index_axis_mut(ndarray::Axis(0), q_layer)
            .assign(&sp.to_real(acc));
    }
    Ok(out)
}

/// Forward PV relation q = lap(psi) + F (psi_other - psi), used by tests to
/// round-trip the spectral inversion.
pub fn psi_to_q(psi: ArrayView3<f64>, cfg: &QgConfig) -> Result<Array3<f64>> {
    let n = cfg.grid_side;
    if psi.dim() != (2, n, n) {
        return Err(SoadError::Shape("psi must be (2, n, n)".into()));
    }
    let sp = Spectral::new(n, cfg.domain);
    let (f1, f2) = (cfg.f1(), cfg.f2());
    let ph = [
        sp.to_spectral(&psi.index_axis(ndarray::Axis(0), 0).to_owned()),
        sp.to_spectral(&psi.index_axis(ndarray::Axis(0), 1).to_owned()),
    ];
    let mut out = Array3::zeros((2, n, n));
    for (layer, (f, other)) in [(f1, 1usize), (f2, 0usize)].into_iter().enumerate() {
        let qh = Array2::from_shape_fn((n, n), |(i, j)| {
            let k2 = sp.kappa2(i, j);
            ph[layer][[i, j]] * (-k2 - f) + ph[other][[i, j]] * f
        });
        out.index_axis_mut(ndarray::Axis(0), layer)
            .assign(&sp.to_real(qh));
    }
    Ok(out)
}
