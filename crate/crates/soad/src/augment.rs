//! State-observation augmentation: builds z = (x, H(x)) per window step,
//! constructs the per-step subsampling operators that turn every realized
//! observation into a linear selection of the augmented vector, and draws
//! synthetic observation sets.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::qg::{vort2vel, vort2vel_adjoint, QgConfig};
use crate::error::{Result, SoadError};
use crate::rng::substream;

/// Spatial arrangement of the per-channel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridShape {
    OneD(usize),
    TwoD(usize, usize),
}

impl GridShape {
    pub fn len(&self) -> usize {
        match self {
            GridShape::OneD(n) => *n,
            GridShape::TwoD(h, w) => h * w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Identifier for the supported observation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Identity,
    ArctanEasy,
    SinHard,
    Vort2Vel,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OperatorKind::Identity => "identity",
            OperatorKind::ArctanEasy => "arctan_easy",
            OperatorKind::SinHard => "sin_hard",
            OperatorKind::Vort2Vel => "vort2vel",
        };
        f.write_str(s)
    }
}

/// A full-domain observation operator applied to one window step.
#[derive(Debug, Clone)]
pub enum ObservationOperator {
    Identity,
    /// x -> arctan(3x), element-wise; injective and monotone.
    ArctanEasy,
    /// x -> (3/2) sin(3x), element-wise; non-injective.
    SinHard,
    /// Two-layer vorticity -> (u1, v1, u2, v2) via the spectral PV inversion,
    /// optionally rescaled per output channel.
    Vort2Vel {
        config: QgConfig,
        scale: Option<[f64; 4]>,
    },
}

impl ObservationOperator {
    pub fn kind(&self) -> OperatorKind {
        match self {
            ObservationOperator::Identity => OperatorKind::Identity,
            ObservationOperator::ArctanEasy => OperatorKind::ArctanEasy,
            ObservationOperator::SinHard => OperatorKind::SinHard,
            ObservationOperator::Vort2Vel { .. } => OperatorKind::Vort2Vel,
        }
    }

    pub fn output_channels(&self, state_channels: usize) -> Result<usize> {
        match self {
            ObservationOperator::Vort2Vel { .. } => {
                if state_channels != 2 {
                    return Err(SoadError::Config(
                        "vort2vel requires exactly two vorticity layers".into(),
                    ));
                }
                Ok(4)
            }
            _ => Ok(state_channels),
        }
    }

    /// Apply to one step, `x` of shape (state_channels, grid).
    pub fn apply(&self, x: ArrayView2<f64>, grid: GridShape) -> Result<Array2<f64>> {
        match self {
            ObservationOperator::Identity => Ok(x.to_owned()),
            ObservationOperator::ArctanEasy => Ok(x.mapv(|v| (3.0 * v).atan())),
            ObservationOperator::SinHard => Ok(x.mapv(|v| 1.5 * (3.0 * v).sin())),
            ObservationOperator::Vort2Vel { config, scale } => {
                let n = match grid {
                    GridShape::TwoD(h, w) if h == w && h == config.grid_side => h,
                    _ => {
                        return Err(SoadError::Shape(
                            "vort2vel needs a square grid matching its config".into(),
                        ))
                    }
                };
                let q = x
                    .to_owned()
                    .into_shape_with_order((2, n, n))
                    .map_err(|e| SoadError::Shape(e.to_string()))?;
                let mut uv = vort2vel(q.view(), config)?;
                if let Some(c) = scale {
                    for (ch, factor) in c.iter().enumerate() {
                        uv.index_axis_mut(ndarray::Axis(0), ch)
                            .mapv_inplace(|v| v * factor);
                    }
                }
                uv.into_shape_with_order((4, n * n))
                    .map_err(|e| SoadError::Shape(e.to_string()))
            }
        }
    }

    /// Vector-Jacobian product: cotangent in output space (C_out, grid)
    /// pulled back to state space (state_channels, grid) at the point `x`.
    pub fn vjp(
        &self,
        x: ArrayView2<f64>,
        cotangent: ArrayView2<f64>,
        grid: GridShape,
    ) -> Result<Array2<f64>> {
        match self {
            ObservationOperator::Identity => Ok(cotangent.to_owned()),
            ObservationOperator::ArctanEasy => {
                Ok(Array2::from_shape_fn(x.dim(), |idx| {
                    let xi = x[idx];
                    cotangent[idx] * 3.0 / (1.0 + 9.0 * xi * xi)
                }))
            }
            ObservationOperator::SinHard => Ok(Array2::from_shape_fn(x.dim(), |idx| {
                cotangent[idx] * 4.5 * (3.0 * x[idx]).cos()
            })),
            ObservationOperator::Vort2Vel { config, scale } => {
                let n = config.grid_side;
                if grid != GridShape::TwoD(n, n) {
                    return Err(SoadError::Shape(
                        "vort2vel needs a square grid matching its config".into(),
                    ));
                }
                let mut cot = cotangent
                    .to_owned()
                    .into_shape_with_order((4, n, n))
                    .map_err(|e| SoadError::Shape(e.to_string()))?;
                if let Some(c) = scale {
                    for (ch, factor) in c.iter().enumerate() {
                        cot.index_axis_mut(ndarray::Axis(0), ch)
                            .mapv_inplace(|v| v * factor);
                    }
                }
                let back = vort2vel_adjoint(cot.view(), config)?;
                back.into_shape_with_order((2, n * n))
                    .map_err(|e| SoadError::Shape(e.to_string()))
            }
        }
    }
}

/// One observation block of the augmented channel stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObsBlock {
    pub kind: OperatorKind,
    pub channels: usize,
}

/// Channel layout of the augmented window. Per step, channels are ordered as
/// (state channels, block 0 channels, block 1 channels, ...), each channel
/// holding `grid.len()` values; steps are concatenated to form the flattened
/// window vector the denoiser and sampler operate on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentedLayout {
    pub window_len: usize,
    pub state_channels: usize,
    pub grid: GridShape,
    pub blocks: Vec<ObsBlock>,
}

impl AugmentedLayout {
    pub fn total_channels(&self) -> usize {
        self.state_channels + self.blocks.iter().map(|b| b.channels).sum::<usize>()
    }

    /// Flattened size of one step.
    pub fn step_dim(&self) -> usize {
        self.total_channels() * self.grid.len()
    }

    /// Flattened size of the whole window.
    pub fn window_dim(&self) -> usize {
        self.window_len * self.step_dim()
    }

    pub fn flat_index(&self, step: usize, channel: usize, g: usize) -> usize {
        step * self.step_dim() + channel * self.grid.len() + g
    }

    /// Channel offset of observation block `i`.
    pub fn block_channel_offset(&self, block: usize) -> usize {
        self.state_channels
            + self.blocks[..block].iter().map(|b| b.channels).sum::<usize>()
    }

    /// Within-step flat range covered by the raw state.
    pub fn state_range(&self) -> std::ops::Range<usize> {
        0..self.state_channels * self.grid.len()
    }

    /// Indices of the raw-state block of the flattened window, step by step.
    pub fn state_flat_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.window_len * self.state_channels * self.grid.len());
        for step in 0..self.window_len {
            for idx in self.state_range() {
                out.push(step * self.step_dim() + idx);
            }
        }
        out
    }
}

/// Concatenate the state with all operator outputs, step by step.
///
/// Returns the augmented window of shape (window, total_channels, grid) and
/// its layout descriptor.
pub fn augment(
    x_window: ArrayView3<f64>,
    operators: &[ObservationOperator],
    grid: GridShape,
) -> Result<(Array3<f64>, AugmentedLayout)> {
    if operators.is_empty() {
        return Err(SoadError::Input("operator list is empty".into()));
    }
    let (window_len, state_channels, g) = x_window.dim();
    if g != grid.len() {
        return Err(SoadError::Shape(format!(
            "grid shape says {} points, window has {g}",
            grid.len()
        )));
    }
    if x_window.iter().any(|v| !v.is_finite()) {
        return Err(SoadError::Input("non-finite state values".into()));
    }
    let mut blocks = Vec::with_capacity(operators.len());
    for op in operators {
        blocks.push(ObsBlock {
            kind: op.kind(),
            channels: op.output_channels(state_channels)?,
        });
    }
    let layout = AugmentedLayout {
        window_len,
        state_channels,
        grid,
        blocks,
    };
    let mut z = Array3::zeros((window_len, layout.total_channels(), g));
    for step in 0..window_len {
        let x_step = x_window.index_axis(ndarray::Axis(0), step);
        for c in 0..state_channels {
            z.index_axis_mut(ndarray::Axis(0), step)
                .index_axis_mut(ndarray::Axis(0), c)
                .assign(&x_step.index_axis(ndarray::Axis(0), c));
        }
        let mut offset = state_channels;
        for op in operators {
            let out = op.apply(x_step, grid)?;
            for c in 0..out.nrows() {
                z.index_axis_mut(ndarray::Axis(0), step)
                    .index_axis_mut(ndarray::Axis(0), offset + c)
                    .assign(&out.index_axis(ndarray::Axis(0), c));
            }
            offset += out.nrows();
        }
    }
    Ok((z, layout))
}

/// Grid masking strategy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum MaskMode {
    /// ceil(p * G) distinct grid points per observed frame.
    Random { p: f64 },
    /// Regular lattice with spacing s (applied per axis on 2-D grids).
    Stride { s: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaskSpec {
    pub mode: MaskMode,
    /// Frames k are observed iff k % interval == 0.
    pub interval: usize,
    pub seed: u64,
    /// Reuse one random mask for every observed frame instead of resampling.
    pub fixed_across_window: bool,
}

impl MaskSpec {
    pub fn random(p: f64, interval: usize, seed: u64) -> Self {
        Self { mode: MaskMode::Random { p }, interval, seed, fixed_across_window: false }
    }

    pub fn stride(s: usize, interval: usize) -> Self {
        Self { mode: MaskMode::Stride { s }, interval, seed: 0, fixed_across_window: false }
    }
}

/// Per-step selection of observed coordinates.
///
/// `indices` are flat positions inside the step's augmented slice
/// (channel * grid + g), strictly increasing, and always inside the
/// observation blocks for operators produced by [`build_subsampling`].
/// Each index is one row of the implied selection matrix T_k, so
/// T_k T_k^T = I holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsamplingOperator {
    pub step: usize,
    pub indices: Vec<usize>,
}

impl SubsamplingOperator {
    pub fn rows(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Complementary selection ("compensated" operator): every within-step
    /// coordinate not selected by this operator, in ascending order.
    pub fn complement(&self, layout: &AugmentedLayout) -> Vec<usize> {
        let mut mask = vec![false; layout.step_dim()];
        for &i in &self.indices {
            mask[i] = true;
        }
        (0..layout.step_dim()).filter(|&i| !mask[i]).collect()
    }

    /// Dense matrix form of T_k over the step slice (for tests and the
    /// covariance identity checks).
    pub fn dense(&self, layout: &AugmentedLayout) -> Array2<f64> {
        let mut t = Array2::zeros((self.indices.len(), layout.step_dim()));
        for (row, &col) in self.indices.iter().enumerate() {
            t[[row, col]] = 1.0;
        }
        t
    }
}

fn grid_mask(mode: MaskMode, grid: GridShape, rng_seed: u64, tags: &[u64]) -> Result<Vec<usize>> {
    match mode {
        MaskMode::Random { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(SoadError::Config(format!("mask ratio p = {p} outside (0, 1]")));
            }
            let g = grid.len();
            let count = ((p * g as f64).ceil() as usize).clamp(1, g);
            let mut rng = substream(rng_seed, tags);
            // Partial Fisher-Yates over the index pool.
            let mut pool: Vec<usize> = (0..g).collect();
            for i in 0..count {
                let j = i + rand::Rng::random_range(&mut rng, 0..(g - i));
                pool.swap(i, j);
            }
            let mut chosen = pool[..count].to_vec();
            chosen.sort_unstable();
            Ok(chosen)
        }
        MaskMode::Stride { s } => {
            if s == 0 {
                return Err(SoadError::Config("stride must be positive".into()));
            }
            match grid {
                GridShape::OneD(n) => {
                    if s > n {
                        return Err(SoadError::Config(format!(
                            "stride {s} exceeds grid length {n}"
                        )));
                    }
                    Ok((0..n).step_by(s).collect())
                }
                GridShape::TwoD(h, w) => {
                    if s > h || s > w {
                        return Err(SoadError::Config(format!(
                            "stride {s} exceeds grid side ({h}, {w})"
                        )));
                    }
                    let mut out = Vec::new();
                    for i in (0..h).step_by(s) {
                        for j in (0..w).step_by(s) {
                            out.push(i * w + j);
                        }
                    }
                    Ok(out)
                }
            }
        }
    }
}

/// Build the per-step subsampling operators for a masked observation
/// pattern. Selected rows always address observation-block coordinates,
/// never the raw state; unobserved frames get empty operators.
pub fn build_subsampling(
    mask: &MaskSpec,
    layout: &AugmentedLayout,
    window_len: usize,
) -> Result<Vec<SubsamplingOperator>> {
    if mask.interval == 0 {
        return Err(SoadError::Config("observation interval must be >= 1".into()));
    }
    if layout.blocks.is_empty() {
        return Err(SoadError::Config(
            "layout has no observation blocks to subsample".into(),
        ));
    }
    let g = layout.grid.len();
    let obs_channels: Vec<usize> =
        (layout.state_channels..layout.total_channels()).collect();
    let fixed = if mask.fixed_across_window {
        Some(grid_mask(mask.mode, layout.grid, mask.seed, &[])?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(window_len);
    for step in 0..window_len {
        if step % mask.interval != 0 {
            out.push(SubsamplingOperator { step, indices: Vec::new() });
            continue;
        }
        let cells = match &fixed {
            Some(m) => m.clone(),
            None => grid_mask(mask.mode, layout.grid, mask.seed, &[step as u64])?,
        };
        let mut indices = Vec::with_capacity(cells.len() * obs_channels.len());
        for &c in &obs_channels {
            for &cell in &cells {
                indices.push(c * g + cell);
            }
        }
        indices.sort_unstable();
        out.push(SubsamplingOperator { step, indices });
    }
    Ok(out)
}

/// One step of realized observations: selected coordinates, observed values,
/// and per-row noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsStep {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
}

/// Realized observations over a window: `y_k = T_k z_k + eps_k` with
/// `eps_k ~ N(0, sigma_k^2)` per row. Rows carry individual noise levels so a
/// background prior with its own sigma can share the machinery; plain
/// observation rows all use the base `sigma`.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub layout: AugmentedLayout,
    pub steps: Vec<ObsStep>,
    pub sigma: f64,
}

impl ObservationSet {
    pub fn total_rows(&self) -> usize {
        self.steps.iter().map(|s| s.indices.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_rows() == 0
    }

    /// Rows as (flat window index, observed value, noise level).
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        let sd = self.layout.step_dim();
        let mut out = Vec::with_capacity(self.total_rows());
        for (k, step) in self.steps.iter().enumerate() {
            for ((&i, &v), &s) in step.indices.iter().zip(&step.values).zip(&step.sigmas) {
                out.push((k * sd + i, v, s));
            }
        }
        out
    }

    /// Dense stacked selection matrix over the flattened window.
    pub fn dense_matrix(&self) -> Array2<f64> {
        let rows = self.total_rows();
        let mut t = Array2::zeros((rows, self.layout.window_dim()));
        for (row, (col, _, _)) in self.rows().into_iter().enumerate() {
            t[[row, col]] = 1.0;
        }
        t
    }

    pub fn values(&self) -> Array1<f64> {
        Array1::from_iter(self.rows().into_iter().map(|(_, v, _)| v))
    }
}

/// Draw `y_k = T_k z_k + sigma * eps` from the (already normalized)
/// augmented truth window.
pub fn observe(
    z_window: ArrayView3<f64>,
    operators: &[SubsamplingOperator],
    layout: &AugmentedLayout,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if sigma < 0.0 {
        return Err(SoadError::Config("observation noise must be >= 0".into()));
    }
    let (w, c, g) = z_window.dim();
    if c != layout.total_channels() || g != layout.grid.len() || operators.len() > w {
        return Err(SoadError::Shape(
            "augmented window does not match the layout/operators".into(),
        ));
    }
    let normal = StandardNormal;
    let mut steps = Vec::with_capacity(operators.len());
    for op in operators {
        let mut rng = substream(seed, &[op.step as u64, 1]);
        let step_slice = z_window.index_axis(ndarray::Axis(0), op.step);
        let flat = step_slice
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order(c * g)
            .map_err(|e| SoadError::Shape(e.to_string()))?;
        let mut values = Vec::with_capacity(op.indices.len());
        for &idx in &op.indices {
            let noise: f64 = normal.sample(&mut rng);
            values.push(flat[idx] + sigma * noise);
        }
        steps.push(ObsStep {
            indices: op.indices.clone(),
            values,
            sigmas: vec![sigma; op.indices.len()],
        });
    }
    Ok(ObservationSet {
        layout: layout.clone(),
        steps,
        sigma,
    })
}

/// Append identity observations of the raw-state block at step 0 with noise
/// level `sigma_b`. `x0_prior` is the background value itself (e.g. truth
/// plus noise, or a forward-model image of a perturbed previous state), laid
/// out like the flattened raw-state block.
pub fn add_background_prior(
    obs: &ObservationSet,
    x0_prior: ArrayView1<f64>,
    sigma_b: f64,
) -> Result<ObservationSet> {
    let layout = &obs.layout;
    let state_len = layout.state_channels * layout.grid.len();
    if x0_prior.len() != state_len {
        return Err(SoadError::Input(format!(
            "background prior has length {}, raw-state block has {state_len}",
            x0_prior.len()
        )));
    }
    if sigma_b < 0.0 {
        return Err(SoadError::Config("background noise must be >= 0".into()));
    }
    if obs.steps.is_empty() {
        return Err(SoadError::Input("observation set has no steps".into()));
    }
    let mut out = obs.clone();
    let step0 = &mut out.steps[0];
    if step0.indices.iter().any(|&i| i < state_len) {
        return Err(SoadError::Input(
            "step 0 already observes raw-state coordinates".into(),
        ));
    }
    // Keep indices ascending: raw-state coordinates come first in the step.
    let mut indices: Vec<usize> = (0..state_len).collect();
    let mut values: Vec<f64> = x0_prior.to_vec();
    let mut sigmas = vec![sigma_b; state_len];
    indices.extend_from_slice(&step0.indices);
    values.extend_from_slice(&step0.values);
    sigmas.extend_from_slice(&step0.sigmas);
    step0.indices = indices;
    step0.values = values;
    step0.sigmas = sigmas;
    Ok(out)
}

/// Observations of a nonlinear operator applied to the raw (un-augmented)
/// state window: `y = S (H(x) - mean)/std + noise`. Used by the estimator
/// baselines that linearize through the operator instead of augmenting.
#[derive(Debug, Clone)]
pub struct NonlinearObservationSet {
    /// Layout of the raw state window (no observation blocks).
    pub layout: AugmentedLayout,
    pub operator: ObservationOperator,
    /// Affine normalization of operator outputs, per output channel.
    pub out_mean: Array1<f64>,
    pub out_std: Array1<f64>,
    /// Per-step selections in operator-output coordinates (c_out * grid + g).
    pub steps: Vec<ObsStep>,
    pub sigma: f64,
}

impl NonlinearObservationSet {
    pub fn total_rows(&self) -> usize {
        self.steps.iter().map(|s| s.indices.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_rows() == 0
    }

    /// Normalized operator output for one step, flattened to (C_out * grid).
    pub fn apply_normalized(&self, x_step: ArrayView2<f64>) -> Result<Array1<f64>> {
        let g = self.layout.grid.len();
        let out = self.operator.apply(x_step, self.layout.grid)?;
        let c_out = out.nrows();
        let mut flat = Array1::zeros(c_out * g);
        for c in 0..c_out {
            for gg in 0..g {
                flat[c * g + gg] = (out[[c, gg]] - self.out_mean[c]) / self.out_std[c];
            }
        }
        Ok(flat)
    }

    /// Pull an output-space cotangent back through the normalization and the
    /// operator to state space, flattened to (state_channels * grid).
    pub fn vjp_normalized(
        &self,
        x_step: ArrayView2<f64>,
        cot_flat: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        let g = self.layout.grid.len();
        let c_out = cot_flat.len() / g;
        let mut cot = Array2::zeros((c_out, g));
        for c in 0..c_out {
            for gg in 0..g {
                cot[[c, gg]] = cot_flat[c * g + gg] / self.out_std[c];
            }
        }
        let back = self.operator.vjp(x_step, cot.view(), self.layout.grid)?;
        Ok(Array1::from_iter(back.iter().copied()))
    }
}

/// Draw nonlinear observations from the raw truth window using the same
/// grid masks as the augmented route, so paired comparisons share data.
pub fn nonlinear_observe(
    x_window: ArrayView3<f64>,
    operator: &ObservationOperator,
    out_mean: Array1<f64>,
    out_std: Array1<f64>,
    masks: &[SubsamplingOperator],
    raw_layout: &AugmentedLayout,
    obs_layout: &AugmentedLayout,
    sigma: f64,
    seed: u64,
) -> Result<NonlinearObservationSet> {
    let normal = StandardNormal;
    let mut steps = Vec::with_capacity(masks.len());
    for op in masks {
        let mut rng = substream(seed, &[op.step as u64, 1]);
        let x_step = x_window.index_axis(ndarray::Axis(0), op.step);
        let h = NonlinearObservationSet {
            layout: raw_layout.clone(),
            operator: operator.clone(),
            out_mean: out_mean.clone(),
            out_std: out_std.clone(),
            steps: Vec::new(),
            sigma,
        }
        .apply_normalized(x_step)?;
        // Translate augmented-layout indices into operator-output indices by
        // dropping the raw-state channel offset.
        let offset = obs_layout.state_channels * obs_layout.grid.len();
        let mut values = Vec::with_capacity(op.indices.len());
        let mut indices = Vec::with_capacity(op.indices.len());
        for &idx in &op.indices {
            let out_idx = idx - offset;
            let noise: f64 = normal.sample(&mut rng);
            indices.push(out_idx);
            values.push(h[out_idx] + sigma * noise);
        }
        steps.push(ObsStep {
            indices,
            values,
            sigmas: vec![sigma; op.indices.len()],
        });
    }
    Ok(NonlinearObservationSet {
        layout: raw_layout.clone(),
        operator: operator.clone(),
        out_mean,
        out_std,
        steps,
        sigma,
    })
}
