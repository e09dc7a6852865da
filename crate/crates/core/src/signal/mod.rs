//! Multichannel recordings, dataset bundles and basic preparation steps.
//!
//! A [`SignalSample`] is one `channels × time` recording with its sampling
//! rate and subject/label metadata. Samples are grouped into a
//! [`DatasetBundle`], which is what the on-disk format stores and what the
//! sweep consumes.

mod bundle;
mod synth;

pub use bundle::{import_csv, load_bundle, save_bundle, Manifest, ManifestSample, MANIFEST_FILE};
pub use synth::{synthesize, EffectDimension, SynthSpec};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("missing manifest at {0}")]
    MissingManifest(String),
    #[error("payload size mismatch for {file}: expected {expected} floats, found {found} bytes")]
    PayloadSize {
        file: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in sample {0}")]
    NonFinite(String),
    #[error("inconsistent sampling rate: {0} Hz vs {1} Hz")]
    InconsistentRate(f64, f64),
    #[error("inconsistent channel count: {0} vs {1}")]
    InconsistentChannels(usize, usize),
    #[error("invalid sample shape {0}×{1} (need at least 2×2)")]
    Shape(usize, usize),
    #[error("sampling rate must be positive, got {0}")]
    Rate(f64),
    #[error("invalid label {0} (expected 0 or 1)")]
    Label(u8),
    #[error("subject {0} has samples with different labels")]
    SubjectLabel(String),
    #[error("decimation factor {factor} invalid for {n_time} time points")]
    Factor { factor: usize, n_time: usize },
    #[error("window of {0} points is too short")]
    Window(usize),
    #[error("csv: {0}")]
    Csv(String),
    #[error("synthesis spec: {0}")]
    Synth(String),
}

impl SignalError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SignalError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Binary class label; stored as `0` (control) or `1` (patient).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Control,
    Patient,
}

impl Label {
    /// `-1` for control, `+1` for patient.
    pub fn sign(self) -> f64 {
        match self {
            Label::Control => -1.0,
            Label::Patient => 1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value >= 0.0 {
            Label::Patient
        } else {
            Label::Control
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = SignalError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Control),
            1 => Ok(Label::Patient),
            other => Err(SignalError::Label(other)),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Control => 0,
            Label::Patient => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// One multichannel recording, `data[[channel, time]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSample {
    pub data: Array2<f64>,
    pub fs: f64,
    pub subject_id: String,
    pub label: Label,
    /// Curation flag; samples with `keep == false` are ignored by the sweep.
    pub keep: bool,
}

impl SignalSample {
    pub fn new(
        data: Array2<f64>,
        fs: f64,
        subject_id: impl Into<String>,
        label: Label,
    ) -> Result<Self, SignalError> {
        let s = SignalSample {
            data,
            fs,
            subject_id: subject_id.into(),
            label,
            keep: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_time(&self) -> usize {
        self.data.ncols()
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let (c, t) = self.data.dim();
        if c < 2 || t < 2 {
            return Err(SignalError::Shape(c, t));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(SignalError::Rate(self.fs));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(self.subject_id.clone()));
        }
        Ok(())
    }
}

/// An ordered collection of samples sharing channel layout and sampling rate.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub channel_names: Vec<String>,
    pub samples: Vec<SignalSample>,
    /// Free-form preparation log, e.g. `decimate:block-mean:4`.
    pub provenance: Vec<String>,
}

impl DatasetBundle {
    pub fn new(name: impl Into<String>, channel_names: Vec<String>) -> Self {
        DatasetBundle {
            name: name.into(),
            channel_names,
            samples: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    /// Sampling rate shared by all samples, `None` when empty.
    pub fn fs(&self) -> Option<f64> {
        self.samples.first().map(|s| s.fs)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let n_c = self.n_channels();
        let fs = self.fs();
        let mut labels: BTreeMap<&str, Label> = BTreeMap::new();
        for s in &self.samples {
            s.validate()?;
            if s.n_channels() != n_c {
                return Err(SignalError::InconsistentChannels(n_c, s.n_channels()));
            }
            if let Some(fs) = fs {
                if s.fs != fs {
                    return Err(SignalError::InconsistentRate(fs, s.fs));
                }
            }
            match labels.insert(&s.subject_id, s.label) {
                Some(prev) if prev != s.label => {
                    return Err(SignalError::SubjectLabel(s.subject_id.clone()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Subjects in first-appearance order with their labels.
    pub fn subjects(&self) -> Vec<(String, Label)> {
        let mut seen = std::collections::HashSet::new();
        self.samples
            .iter()
            .filter(|s| seen.insert(s.subject_id.as_str()))
            .map(|s| (s.subject_id.clone(), s.label))
            .collect()
    }

    /// Samples flagged for use.
    pub fn kept(&self) -> impl Iterator<Item = &SignalSample> {
        self.samples.iter().filter(|s| s.keep)
    }
}

/// Block-mean decimation: each output point averages `factor` consecutive
/// inputs, and the trailing `n_time % factor` points are dropped.
pub fn decimate(sample: &SignalSample, factor: usize) -> Result<SignalSample, SignalError> {
    let n_t = sample.n_time();
    if factor == 0 || factor > n_t {
        return Err(SignalError::Factor { factor, n_time: n_t });
    }
    if factor == 1 {
        return Ok(sample.clone());
    }
    let n_out = n_t / factor;
    let mut out = Array2::zeros((sample.n_channels(), n_out));
    for (src, mut dst) in sample.data.outer_iter().zip(out.outer_iter_mut()) {
        for (k, d) in dst.iter_mut().enumerate() {
            let block = src.slice(ndarray::s![k * factor..(k + 1) * factor]);
            *d = block.sum() / factor as f64;
        }
    }
    Ok(SignalSample {
        data: out,
        fs: sample.fs / factor as f64,
        subject_id: sample.subject_id.clone(),
        label: sample.label,
        keep: sample.keep,
    })
}

/// Splits a recording into consecutive non-overlapping windows of
/// `round(window_seconds · fs)` points. The trailing partial window is
/// dropped; a window longer than the recording yields no samples.
pub fn partition(
    sample: &SignalSample,
    window_seconds: f64,
) -> Result<Vec<SignalSample>, SignalError> {
    let len = (window_seconds * sample.fs).round();
    if !(len >= 2.0) {
        return Err(SignalError::Window(len.max(0.0) as usize));
    }
    let len = len as usize;
    let count = sample.n_time() / len;
    Ok((0..count)
        .map(|w| SignalSample {
            data: sample
                .data
                .slice(ndarray::s![.., w * len..(w + 1) * len])
                .to_owned(),
            fs: sample.fs,
            subject_id: sample.subject_id.clone(),
            label: sample.label,
            keep: sample.keep,
        })
        .collect())
}

/// Per-channel mean power, used by tests and diagnostics.
pub fn channel_power(sample: &SignalSample) -> Vec<f64> {
    sample
        .data
        .map_axis(Axis(1), |row| row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64)
        .to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn sample(data: Array2<f64>, fs: f64) -> SignalSample {
        SignalSample {
            data,
            fs,
            subject_id: "s".into(),
            label: Label::Control,
            keep: true,
        }
    }

    #[test]
    fn decimate_block_means() {
        let s = sample(
            array![[1., 3., 5., 7., 2., 4., 6., 8.], [0., 0., 0., 0., 0., 0., 0., 0.]],
            100.0,
        );
        let d = decimate(&s, 2).unwrap();
        assert_eq!(d.data.row(0).to_vec(), vec![2., 6., 3., 7.]);
        assert_eq!(d.fs, 50.0);
    }

    #[test]
    fn decimate_identity_and_errors() {
        let s = sample(Array2::from_shape_fn((2, 10), |(c, t)| (c * 10 + t) as f64), 10.0);
        assert_eq!(decimate(&s, 1).unwrap(), s);
        assert!(matches!(decimate(&s, 0), Err(SignalError::Factor { .. })));
        assert!(matches!(decimate(&s, 11), Err(SignalError::Factor { .. })));
    }

    #[test]
    fn decimate_dataset_one_shape() {
        let s = sample(Array2::zeros((23, 24580)), 2048.0);
        let d = decimate(&s, 4).unwrap();
        assert_eq!(d.data.dim(), (23, 6145));
        assert_eq!(d.fs, 512.0);
    }

    #[test]
    fn partition_drops_trailing_points() {
        let s = sample(Array2::from_shape_fn((2, 100), |(_, t)| t as f64), 10.0);
        let w = partition(&s, 3.0).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|x| x.data.dim() == (2, 30)));
        assert_eq!(w[2].data[[0, 0]], 60.0);
        assert!(partition(&s, 1000.0).unwrap().is_empty());
        assert!(matches!(partition(&s, 0.1), Err(SignalError::Window(_))));
    }

    #[test]
    fn partition_sixty_seconds() {
        let s = sample(Array2::zeros((19, 30000)), 500.0);
        let w = partition(&s, 60.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].data.dim(), (19, 30000));
    }

    #[test]
    fn validation_rejects_bad_samples() {
        let mut s = sample(Array2::zeros((2, 4)), 10.0);
        s.data[[1, 2]] = f64::NAN;
        assert!(matches!(s.validate(), Err(SignalError::NonFinite(_))));
        assert!(SignalSample::new(Array2::zeros((1, 4)), 1.0, "a", Label::Patient).is_err());
        assert!(SignalSample::new(Array2::zeros((2, 4)), 0.0, "a", Label::Patient).is_err());
    }

    #[test]
    fn bundle_rejects_mixed_rates() {
        let mut b = DatasetBundle::new("x", vec!["a".into(), "b".into()]);
        b.samples.push(sample(Array2::zeros((2, 4)), 10.0));
        b.samples.push(sample(Array2::zeros((2, 4)), 20.0));
        assert!(matches!(b.validate(), Err(SignalError::InconsistentRate(..))));
    }

    proptest! {
        #[test]
        fn decimation_composes(a in 1usize..5, b in 1usize..5, blocks in 1usize..6, seed in any::<u64>()) {
            let n_t = (a * b * blocks).max(2);
            prop_assume!(n_t % (a * b) == 0);
            let data = Array2::from_shape_fn((2, n_t), |(c, t)| {
                (crate::seed::derive_seed(seed, &[c as u64, t as u64]) % 1000) as f64 / 37.0
            });
            let s = sample(data, 64.0);
            let once = decimate(&s, a * b).unwrap();
            let twice = decimate(&decimate(&s, a).unwrap(), b).unwrap();
            prop_assert_eq!(once.data.dim(), twice.data.dim());
            for (x, y) in once.data.iter().zip(twice.data.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(once.fs, twice.fs);
        }

        #[test]
        fn partition_is_ordered_prefix(n_t in 2usize..200, win in 2usize..50) {
            let s = sample(Array2::from_shape_fn((2, n_t), |(c, t)| (c * 1000 + t) as f64), 1.0);
            let parts = partition(&s, win as f64).unwrap();
            prop_assert_eq!(parts.len(), n_t / win);
            let joined: Vec<f64> = parts.iter().flat_map(|p| p.data.row(1).to_vec()).collect();
            prop_assert_eq!(&joined[..], &s.data.row(1).to_vec()[..joined.len()]);
        }
    }
}
