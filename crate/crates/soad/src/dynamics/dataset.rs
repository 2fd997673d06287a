//! Windowing, train/validation/test splitting, augmentation, and per-channel
//! normalization of raw trajectories into training-ready tensors.
//!
//! Normalization is two-phase: raw state channels are standardized with
//! statistics from the training windows, the observation operators are
//! applied to the standardized states, and the resulting observation-block
//! channels are standardized in turn (this supplies the empirical output
//! scaling for operators like the vorticity-to-velocity map). All stored
//! tensors are float32; statistics are kept in float64.

use ndarray::{Array1, Array3, Array4, ArrayView3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentedLayout, GridShape, ObservationOperator};
use crate::error::{Result, SoadError};
use crate::rng::substream;

/// Per-channel affine normalization: stored = (value - mean) / std.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// A split of augmented, normalized windows.
#[derive(Debug, Clone)]
pub struct AugmentedTrajectory {
    /// Shape (windows, window_len, channels, grid).
    pub windows: Array4<f32>,
    pub layout: AugmentedLayout,
    pub stats: ChannelStats,
}

impl AugmentedTrajectory {
    pub fn num_windows(&self) -> usize {
        self.windows.dim().0
    }

    /// One window as float64, shape (window_len, channels, grid).
    pub fn window_f64(&self, i: usize) -> Array3<f64> {
        self.windows.index_axis(Axis(0), i).mapv(|v| v as f64)
    }

    /// One window flattened to the sampler's coordinate order.
    pub fn flat_window(&self, i: usize) -> Array1<f64> {
        let (_, w, c, g) = self.windows.dim();
        let win = self.window_f64(i);
        win.into_shape_with_order(w * c * g)
            .expect("window is contiguous")
    }
}

/// Augmented dataset split by whole trajectories.
#[derive(Debug, Clone)]
pub struct SoadDataset {
    pub train: AugmentedTrajectory,
    pub val: AugmentedTrajectory,
    pub test: AugmentedTrajectory,
}

impl SoadDataset {
    pub fn layout(&self) -> &AugmentedLayout {
        &self.train.layout
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.train.stats
    }

    /// Normalization statistics of one observation block's channels.
    pub fn block_stats(&self, block: usize) -> (Array1<f64>, Array1<f64>) {
        let layout = self.layout();
        let offset = layout.block_channel_offset(block);
        let ch = layout.blocks[block].channels;
        let mean = Array1::from_iter(self.stats().mean[offset..offset + ch].iter().copied());
        let std = Array1::from_iter(self.stats().std[offset..offset + ch].iter().copied());
        (mean, std)
    }
}

fn window_starts(total: usize, window_length: usize, stride: usize) -> Vec<usize> {
    (0..)
        .map(|i| i * stride)
        .take_while(|&s| s + window_length <= total)
        .collect()
}

/// Build the augmented dataset from raw trajectories of shape
/// (snapshots, state_channels, grid).
///
/// Windows of `window_length` snapshots start every `window_stride` snapshots
/// (the decorrelation gap is `window_stride - window_length`); windows never
/// cross trajectory boundaries. Trajectories are split 8:1:1 after a seeded
/// shuffle.
pub fn build_dataset(
    trajectories: &[Array3<f64>],
    grid: GridShape,
    operators: &[ObservationOperator],
    window_length: usize,
    window_stride: usize,
    seed: u64,
) -> Result<SoadDataset> {
    if trajectories.is_empty() {
        return Err(SoadError::Input("no trajectories supplied".into()));
    }
    if window_length == 0 || window_stride == 0 {
        return Err(SoadError::Config("window length and stride must be positive".into()));
    }
    let (_, c_state, g) = trajectories[0].dim();
    if g != grid.len() {
        return Err(SoadError::Shape("grid shape does not match trajectories".into()));
    }
    for t in trajectories {
        let (len, c, gg) = t.dim();
        if c != c_state || gg != g {
            return Err(SoadError::Shape("trajectories disagree in channel/grid shape".into()));
        }
        if len < window_length {
            return Err(SoadError::Config(format!(
                "trajectory of {len} snapshots is shorter than one window ({window_length})"
            )));
        }
    }

    // Split whole trajectories 8:1:1.
    let n = trajectories.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, &[0x5411_7]));
    let (n_val, n_test) = if n >= 3 {
        ((n / 10).max(1), (n / 10).max(1))
    } else if n == 2 {
        (0, 1)
    } else {
        (0, 0)
    };
    let n_train = n - n_val - n_test;
    let train_ids = &order[..n_train];
    let val_ids = &order[n_train..n_train + n_val];
    let test_ids = &order[n_train + n_val..];

    // Collect raw windows per split.
    let collect = |ids: &[usize]| -> Vec<Array3<f64>> {
        let mut out = Vec::new();
        for &ti in ids {
            let t = &trajectories[ti];
            for s in window_starts(t.dim().0, window_length, window_stride) {
                out.push(t.slice(ndarray::s![s..s + window_length, .., ..]).to_owned());
            }
        }
        out
    };
    let raw_train = collect(train_ids);
    let raw_val = collect(val_ids);
    let raw_test = collect(test_ids);
    if raw_train.is_empty() {
        return Err(SoadError::Config("training split has no windows".into()));
    }

    // Phase 1: state-channel statistics over the training windows.
    let mut state_mean = vec![0.0; c_state];
    let mut state_std = vec![0.0; c_state];
    for ch in 0..c_state {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for w in &raw_train {
            for v in w.index_axis(Axis(1), ch).iter() {
                sum += v;
                sumsq += v * v;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = (sumsq / count as f64 - mean * mean).max(0.0);
        state_mean[ch] = mean;
        state_std[ch] = var.sqrt().max(1e-12);
    }

    let normalize_state = |windows: &[Array3<f64>]| -> Vec<Array3<f64>> {
        windows
            .iter()
            .map(|w| {
                let mut out = w.clone();
                for ch in 0..c_state {
                    let (m, s) = (state_mean[ch], state_std[ch]);
                    out.index_axis_mut(Axis(1), ch).mapv_inplace(|v| (v - m) / s);
                }
                out
            })
            .collect()
    };
    let norm_train = normalize_state(&raw_train);
    let norm_val = normalize_state(&raw_val);
    let norm_test = normalize_state(&raw_test);

    // Phase 2: augment normalized windows, then standardize the observation
    // blocks with training statistics.
    let augment_all = |windows: &[Array3<f64>]| -> Result<(Vec<Array3<f64>>, AugmentedLayout)> {
        let mut out = Vec::with_capacity(windows.len());
        let mut layout = None;
        for w in windows {
            let (z, l) = augment(w.view(), operators, grid)?;
            layout.get_or_insert(l);
            out.push(z);
        }
        Ok((out, layout.expect("at least one window")))
    };
    let (aug_train, layout) = augment_all(&norm_train)?;
    let (aug_val, _) = if norm_val.is_empty() {
        (Vec::new(), layout.clone())
    } else {
        augment_all(&norm_val)?
    };
    let (aug_test, _) = if norm_test.is_empty() {
        (Vec::new(), layout.clone())
    } else {
        augment_all(&norm_test)?
    };

    let c_total = layout.total_channels();
    let mut mean = vec![0.0; c_total];
    let mut std = vec![1.0; c_total];
    mean[..c_state].copy_from_slice(&state_mean);
    std[..c_state].copy_from_slice(&state_std);
    for ch in c_state..c_total {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for w in &aug_train {
            for v in w.index_axis(Axis(1), ch).iter() {
                sum += v;
                sumsq += v * v;
                count += 1;
            }
        }
        let m = sum / count as f64;
        let var = (sumsq / count as f64 - m * m).max(0.0);
        mean[ch] = m;
        std[ch] = var.sqrt().max(1e-12);
    }

    let stats = ChannelStats { mean, std };
    let finalize = |mut windows: Vec<Array3<f64>>| -> Array4<f32> {
        for w in &mut windows {
            for ch in c_state..c_total {
                let (m, s) = (stats.mean[ch], stats.std[ch]);
                w.index_axis_mut(Axis(1), ch).mapv_inplace(|v| (v - m) / s);
            }
        }
        let mut tensor = Array4::zeros((windows.len(), window_length, c_total, g));
        for (i, w) in windows.iter().enumerate() {
            tensor
                .index_axis_mut(Axis(0), i)
                .assign(&w.mapv(|v| v as f32));
        }
        tensor
    };

    let make = |tensor: Array4<f32>| AugmentedTrajectory {
        windows: tensor,
        layout: layout.clone(),
        stats: stats.clone(),
    };

    Ok(SoadDataset {
        train: make(finalize(aug_train)),
        val: make(finalize(aug_val)),
        test: make(finalize(aug_test)),
    })
}

/// Normalize a raw state window with dataset statistics (first
/// `state_channels` entries of the stats vectors).
pub fn normalize_state_window(
    raw: ArrayView3<f64>,
    stats: &ChannelStats,
    state_channels: usize,
) -> Array3<f64> {
    let mut out = raw.to_owned();
    for ch in 0..state_channels {
        let (m, s) = (stats.mean[ch], stats.std[ch]);
        out.index_axis_mut(Axis(1), ch).mapv_inplace(|v| (v - m) / s);
    }
    out
}
