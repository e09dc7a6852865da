//! On-disk bundle format.
//!
//! A bundle is a directory holding `manifest.json` and one payload file per
//! sample. Payloads are channel-major little-endian `f32`, exactly
//! `n_channels · n_time` values with no header.

use super::{DatasetBundle, Label, SignalError, SignalSample};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub fs: Option<f64>,
    pub n_channels: usize,
    pub channel_names: Vec<String>,
    pub samples: Vec<ManifestSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub file: String,
    pub subject_id: String,
    pub label: Label,
    pub n_time: usize,
    #[serde(default = "default_keep")]
    pub keep: bool,
}

fn default_keep() -> bool {
    true
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle, SignalError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(SignalError::MissingManifest(manifest_path.display().to_string()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| SignalError::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| SignalError::Manifest(e.to_string()))?;
    if manifest.channel_names.len() != manifest.n_channels {
        return Err(SignalError::Manifest(format!(
            "n_channels = {} but {} channel names",
            manifest.n_channels,
            manifest.channel_names.len()
        )));
    }
    if !manifest.samples.is_empty() && manifest.fs.is_none() {
        return Err(SignalError::Manifest("missing fs".into()));
    }

    let n_c = manifest.n_channels;
    let fs = manifest.fs.unwrap_or(0.0);
    let samples = manifest
        .samples
        .par_iter()
        .map(|entry| read_sample(dir, entry, n_c, fs))
        .collect::<Result<Vec<_>, _>>()?;

    let bundle = DatasetBundle {
        name: manifest.name,
        channel_names: manifest.channel_names,
        samples,
        provenance: manifest.provenance,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn read_sample(
    dir: &Path,
    entry: &ManifestSample,
    n_c: usize,
    fs: f64,
) -> Result<SignalSample, SignalError> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| SignalError::io(&path, e))?;
    let expected = n_c * entry.n_time;
    if bytes.len() != expected * 4 {
        return Err(SignalError::PayloadSize {
            file: entry.file.clone(),
            expected,
            found: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let data = Array2::from_shape_vec((n_c, entry.n_time), values)
        .map_err(|e| SignalError::Manifest(e.to_string()))?;
    let sample = SignalSample {
        data,
        fs,
        subject_id: entry.subject_id.clone(),
        label: entry.label,
        keep: entry.keep,
    };
    sample.validate()?;
    Ok(sample)
}

pub fn save_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<(), SignalError> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| SignalError::io(dir, e))?;

    let mut entries = Vec::with_capacity(bundle.samples.len());
    for (i, s) in bundle.samples.iter().enumerate() {
        let file = format!("sample_{i:05}.f32");
        let path = dir.join(&file);
        let mut bytes = Vec::with_capacity(s.data.len() * 4);
        for v in s.data.iter() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(&path, bytes).map_err(|e| SignalError::io(&path, e))?;
        entries.push(ManifestSample {
            file,
            subject_id: s.subject_id.clone(),
            label: s.label,
            n_time: s.n_time(),
            keep: s.keep,
        });
    }

    let manifest = Manifest {
        name: bundle.name.clone(),
        fs: bundle.fs(),
        n_channels: bundle.n_channels(),
        channel_names: bundle.channel_names.clone(),
        samples: entries,
        provenance: bundle.provenance.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SignalError::Manifest(e.to_string()))?;
    fs::write(&path, text).map_err(|e| SignalError::io(&path, e))
}

/// Reads one CSV recording: rows are time points, columns are channels and
/// the header row names the channels.
pub fn import_csv(
    path: impl AsRef<Path>,
    fs: f64,
    subject_id: &str,
    label: Label,
) -> Result<(Vec<String>, SignalSample), SignalError> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| SignalError::Csv(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| SignalError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let n_c = names.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_c];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SignalError::Csv(e.to_string()))?;
        if record.len() != n_c {
            return Err(SignalError::Csv(format!(
                "row {} has {} fields, expected {n_c}",
                row + 1,
                record.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| SignalError::Csv(format!("row {}: bad number {field:?}", row + 1)))?;
            col.push(v);
        }
    }
    let n_t = columns.first().map_or(0, Vec::len);
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((n_c, n_t), flat).map_err(|e| SignalError::Csv(e.to_string()))?;
    let sample = SignalSample::new(data, fs, subject_id, label)?;
    Ok((names, sample))
}
