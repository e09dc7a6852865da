//! Sweep exports: the accuracy grid, the full JSON record and the
//! accuracy curve along the edges of the configuration triangle.

use super::{HarnessError, SweepResult};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    pub position: usize,
    pub config: (usize, usize, usize),
    pub accuracy: f64,
}

/// Successful configurations with at least one dimension at its grid
/// minimum, ordered around the triangle: max-spectral → max-temporal →
/// max-spatial → back.
pub fn edge_traversal(result: &SweepResult) -> Vec<EdgePoint> {
    let ok: Vec<((usize, usize, usize), f64)> = result.succeeded().map(|(r, m)| (r.triple(), m)).collect();
    if ok.is_empty() {
        return Vec::new();
    }
    let min_f = ok.iter().map(|c| c.0 .0).min().unwrap();
    let min_t = ok.iter().map(|c| c.0 .1).min().unwrap();
    let min_g = ok.iter().map(|c| c.0 .2).min().unwrap();

    let edge = |on: &dyn Fn(&(usize, usize, usize)) -> bool, key: &dyn Fn(&(usize, usize, usize)) -> usize| {
        let mut e: Vec<_> = ok.iter().filter(|c| on(&c.0)).copied().collect();
        e.sort_by_key(|c| std::cmp::Reverse(key(&c.0)));
        e
    };
    // spectral → temporal along n_g = min, temporal → spatial along n_f = min,
    // spatial → spectral along n_t = min
    let legs = [
        edge(&|c| c.2 == min_g, &|c| c.0),
        edge(&|c| c.0 == min_f, &|c| c.1),
        edge(&|c| c.1 == min_t, &|c| c.2),
    ];

    let mut path: Vec<EdgePoint> = Vec::new();
    for (config, accuracy) in legs.into_iter().flatten() {
        if path.iter().any(|p| p.config == config) {
            continue;
        }
        path.push(EdgePoint { position: path.len(), config, accuracy });
    }
    path
}

fn write(path: &Path, text: String) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

pub fn write_edge_csv(points: &[EdgePoint], path: &Path) -> Result<(), HarnessError> {
    let mut s = String::from("path_position,config,accuracy\n");
    for p in points {
        let _ = writeln!(s, "{},{}x{}x{},{:.6}", p.position, p.config.0, p.config.1, p.config.2, p.accuracy);
    }
    write(path, s)
}

fn sweep_csv(result: &SweepResult) -> String {
    let k = result.metadata.folds;
    let mut s = String::from("n_f_feat,n_t_feat,n_g_feat,mean_accuracy");
    for f in 0..k {
        let _ = write!(s, ",fold_{f}");
    }
    s.push('\n');
    for r in &result.results {
        let _ = write!(s, "{},{},{},", r.n_f_feat, r.n_t_feat, r.n_g_feat);
        if let Some(m) = r.mean_accuracy {
            let _ = write!(s, "{m:.6}");
        }
        for f in 0..k {
            s.push(',');
            if let Some(a) = r.fold_accuracies.get(f) {
                let _ = write!(s, "{a:.6}");
            }
        }
        s.push('\n');
    }
    s
}

/// Writes `sweep.csv`, `sweep.json` and `edge.csv` into `dir`.
pub fn export_report(result: &SweepResult, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    write(&dir.join("sweep.csv"), sweep_csv(result))?;
    let json = serde_json::to_string_pretty(result).map_err(|e| HarnessError::Json(e.to_string()))?;
    write(&dir.join("sweep.json"), json)?;
    write_edge_csv(&edge_traversal(result), &dir.join("edge.csv"))
}

pub fn load_result(path: impl AsRef<Path>) -> Result<SweepResult, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Json(e.to_string()))
}
