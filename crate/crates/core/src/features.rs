//! Spectro-temporal feature extraction.
//!
//! A recording is cut into half-overlapping segments, each segment gets its
//! own Hanning-windowed power spectrum (no averaging across segments yet),
//! and the segment axis is then averaged down to `n_t_feat` groups. The
//! result is a `channels × n_t_feat × n_f_feat` tensor that the graph
//! module pools further along the channel axis.
//!
//! Temporal grouping note: the group index divides the segment index by
//! `⌊n_seg / n_t_feat⌋`. The divisor is the number of segments, not the
//! segment length; grouping by segment length would not partition the
//! segments into `n_t_feat` groups. Remainder segments go to the last group.

use crate::signal::SignalSample;
use ndarray::{Array2, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid feature configuration: {0}")]
    Config(String),
    #[error("segment length {0} is degenerate")]
    SegmentLength(usize),
    #[error("segment length {n_t_seg} exceeds recording length {n_time}")]
    SegmentTooLong { n_t_seg: usize, n_time: usize },
    #[error("window length {0} is too short")]
    Window(usize),
    #[error("{n_f} frequency bins requested from segments of length {n_t_seg}")]
    TooManyBins { n_f: usize, n_t_seg: usize },
    #[error("{n_groups} groups requested from {n_in} inputs")]
    TooManyGroups { n_groups: usize, n_in: usize },
    #[error("index {index} out of range for {len} inputs")]
    Index { index: usize, len: usize },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("window has zero energy (segment length {0})")]
    ZeroWindow(usize),
}

/// A spectral/temporal/spatial feature-count triple under a fixed budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_f_feat: usize,
    pub n_t_feat: usize,
    pub n_g_feat: usize,
    pub f_max: f64,
    pub n_feat_budget: usize,
}

impl FeatureConfig {
    pub fn new(n_f_feat: usize, n_t_feat: usize, n_g_feat: usize, f_max: f64) -> Result<Self, FeatureError> {
        if n_f_feat == 0 || n_t_feat == 0 || n_g_feat == 0 {
            return Err(FeatureError::Config("all feature counts must be at least 1".into()));
        }
        if !(f_max > 0.0 && f_max.is_finite()) {
            return Err(FeatureError::Config(format!("f_max must be positive, got {f_max}")));
        }
        Ok(FeatureConfig {
            n_f_feat,
            n_t_feat,
            n_g_feat,
            f_max,
            n_feat_budget: n_f_feat * n_t_feat * n_g_feat,
        })
    }

    pub fn triple(&self) -> (usize, usize, usize) {
        (self.n_f_feat, self.n_t_feat, self.n_g_feat)
    }
}

/// `round(n_f_feat · fs / f_max)`, rounding halves away from zero.
pub fn segment_length(n_f_feat: usize, fs: f64, f_max: f64) -> Result<usize, FeatureError> {
    if n_f_feat == 0 || !(fs > 0.0) || !(f_max > 0.0) {
        return Err(FeatureError::Config("segment_length arguments must be positive".into()));
    }
    // f64::round is half-away-from-zero.
    let len = (n_f_feat as f64 * fs / f_max).round();
    if len < 2.0 {
        return Err(FeatureError::SegmentLength(len as usize));
    }
    Ok(len as usize)
}

/// Number of complete half-overlapping segments of length `n_t_seg`.
pub fn segment_count(n_time: usize, n_t_seg: usize) -> Result<usize, FeatureError> {
    if n_t_seg < 2 {
        return Err(FeatureError::SegmentLength(n_t_seg));
    }
    if n_t_seg > n_time {
        return Err(FeatureError::SegmentTooLong { n_t_seg, n_time });
    }
    Ok((n_time - n_t_seg) / (n_t_seg / 2) + 1)
}

/// `channels × segments × segment_length` view of a recording.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentTensor {
    pub values: Array3<f64>,
    pub fs: f64,
}

impl SegmentTensor {
    pub fn n_segments(&self) -> usize {
        self.values.dim().1
    }

    pub fn segment_len(&self) -> usize {
        self.values.dim().2
    }
}

/// Segment `j` covers `[j·hop, j·hop + n_t_seg)` with `hop = ⌊n_t_seg/2⌋`.
pub fn segment(sample: &SignalSample, n_t_seg: usize) -> Result<SegmentTensor, FeatureError> {
    let n_seg = segment_count(sample.n_time(), n_t_seg)?;
    let hop = n_t_seg / 2;
    let n_c = sample.n_channels();
    let values = Array3::from_shape_fn((n_c, n_seg, n_t_seg), |(c, j, k)| sample.data[[c, j * hop + k]]);
    Ok(SegmentTensor { values, fs: sample.fs })
}

/// `w_i = sin²(iπ/(n−1)) / n`.
pub fn hanning_window(n: usize) -> Result<Vec<f64>, FeatureError> {
    if n < 2 {
        return Err(FeatureError::Window(n));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            // Mirror so the window is exactly symmetric.
            let k = i.min(n - 1 - i) as f64;
            (k * PI / denom).sin().powi(2) / n as f64
        })
        .collect())
}

/// Per-segment power spectra, `channels × segments × n_f_feat`, all entries ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdTensor {
    pub values: Array3<f64>,
}

/// Windowed periodogram of every segment over DFT bins `0..n_f_feat`,
/// normalised by the window energy `Σ w²`. Computed by direct summation.
pub fn psd(segments: &SegmentTensor, n_f_feat: usize) -> Result<PsdTensor, FeatureError> {
    let (n_c, n_seg, n) = segments.values.dim();
    if n_f_feat == 0 || n_f_feat > n {
        return Err(FeatureError::TooManyBins { n_f: n_f_feat, n_t_seg: n });
    }
    let window = hanning_window(n)?;
    let energy: f64 = window.iter().map(|w| w * w).sum();
    if energy <= 0.0 {
        return Err(FeatureError::ZeroWindow(n));
    }

    // Twiddles for bins 0..n_f_feat; the phase index is reduced mod n first.
    let mut cos_t = vec![0.0; n_f_feat * n];
    let mut sin_t = vec![0.0; n_f_feat * n];
    for bin in 0..n_f_feat {
        for h in 0..n {
            let angle = 2.0 * PI * ((bin * h) % n) as f64 / n as f64;
            cos_t[bin * n + h] = angle.cos();
            sin_t[bin * n + h] = -angle.sin();
        }
    }

    let mut out = Array3::zeros((n_c, n_seg, n_f_feat));
    let mut windowed = vec![0.0; n];
    for c in 0..n_c {
        for j in 0..n_seg {
            let seg = segments.values.slice(ndarray::s![c, j, ..]);
            for ((dst, x), w) in windowed.iter_mut().zip(seg.iter()).zip(&window) {
                *dst = x * w;
            }
            for bin in 0..n_f_feat {
                let row_c = &cos_t[bin * n..(bin + 1) * n];
                let row_s = &sin_t[bin * n..(bin + 1) * n];
                let mut re = 0.0;
                let mut im = 0.0;
                for h in 0..n {
                    re += windowed[h] * row_c[h];
                    im += windowed[h] * row_s[h];
                }
                out[[c, j, bin]] = (re * re + im * im) / energy;
            }
        }
    }
    Ok(PsdTensor { values: out })
}

/// Group index of segment `j`: `min(⌊j / ⌊n_seg/n_t_feat⌋⌋, n_t_feat − 1)`.
pub fn temporal_group_index(j: usize, n_seg: usize, n_t_feat: usize) -> Result<usize, FeatureError> {
    if n_t_feat == 0 || n_t_feat > n_seg {
        return Err(FeatureError::TooManyGroups { n_groups: n_t_feat, n_in: n_seg });
    }
    if j >= n_seg {
        return Err(FeatureError::Index { index: j, len: n_seg });
    }
    Ok((j / (n_seg / n_t_feat)).min(n_t_feat - 1))
}

/// Group-averaging matrix: row `i` holds `1/|group|` in column `group_index[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix {
    pub values: Array2<f64>,
    pub group_index: Vec<usize>,
}

impl AssignmentMatrix {
    pub fn from_groups(group_index: Vec<usize>, n_groups: usize) -> Result<Self, FeatureError> {
        let mut sizes = vec![0usize; n_groups];
        for &g in &group_index {
            if g >= n_groups {
                return Err(FeatureError::Index { index: g, len: n_groups });
            }
            sizes[g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(FeatureError::EmptyGroup(empty));
        }
        let mut values = Array2::zeros((group_index.len(), n_groups));
        for (i, &g) in group_index.iter().enumerate() {
            values[[i, g]] = 1.0 / sizes[g] as f64;
        }
        Ok(AssignmentMatrix { values, group_index })
    }

    pub fn n_in(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.values.ncols()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_out()];
        for &g in &self.group_index {
            sizes[g] += 1;
        }
        sizes
    }
}

pub fn temporal_assignment(n_seg: usize, n_t_feat: usize) -> Result<AssignmentMatrix, FeatureError> {
    let groups = (0..n_seg)
        .map(|j| temporal_group_index(j, n_seg, n_t_feat))
        .collect::<Result<Vec<_>, _>>()?;
    AssignmentMatrix::from_groups(groups, n_t_feat)
}

/// A feature tensor after one or more pooling steps, laid out
/// `channels-or-groups × temporal × spectral`.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledTensor {
    pub values: Array3<f64>,
}

impl PooledTensor {
    /// Row-major `(group, time, frequency)` flattening.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// `out[.., m, ..] = Σ_j x[.., j, ..] · s[j, m]` along `axis`, summed in index order.
pub(crate) fn contract_axis(
    x: ArrayView3<'_, f64>,
    axis: usize,
    s: &AssignmentMatrix,
) -> Result<Array3<f64>, FeatureError> {
    let len = x.len_of(Axis(axis));
    if len != s.n_in() {
        return Err(FeatureError::Dimension { expected: s.n_in(), found: len });
    }
    let mut shape = [x.dim().0, x.dim().1, x.dim().2];
    shape[axis] = s.n_out();
    let mut out = Array3::zeros(shape);
    for j in 0..len {
        let src = x.index_axis(Axis(axis), j);
        for m in 0..s.n_out() {
            let w = s.values[[j, m]];
            if w != 0.0 {
                out.index_axis_mut(Axis(axis), m).scaled_add(w, &src);
            }
        }
    }
    Ok(out)
}

pub fn pool_temporal(psd: &PsdTensor, s: &AssignmentMatrix) -> Result<PooledTensor, FeatureError> {
    Ok(PooledTensor { values: contract_axis(psd.values.view(), 1, s)? })
}

/// Segment, transform and pool one recording along time.
pub fn spectro_temporal(sample: &SignalSample, config: &FeatureConfig) -> Result<PooledTensor, FeatureError> {
    let n_t_seg = segment_length(config.n_f_feat, sample.fs, config.f_max)?;
    let segs = segment(sample, n_t_seg)?;
    let spectra = psd(&segs, config.n_f_feat)?;
    let s = temporal_assignment(segs.n_segments(), config.n_t_feat)?;
    pool_temporal(&spectra, &s)
}
