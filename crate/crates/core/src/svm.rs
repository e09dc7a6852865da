//! Binary soft-margin SVM with an RBF kernel, trained by SMO.
//!
//! The solver works on the standard dual
//!
//! ```text
//! min ½ αᵀQα − 1ᵀα   s.t.  yᵀα = 0,  0 ≤ α ≤ C,   Q_ij = y_i y_j k(x_i, x_j)
//! ```
//!
//! and picks the maximal violating pair each step. Ties between equally
//! violating candidates are broken by the content of the samples (feature
//! values, then label), so the trained model does not depend on the order
//! in which the samples are presented.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Deserialize;
use std::cmp::Ordering;
use std::fmt::Write as _;
use thiserror::Error;

pub const KKT_TOLERANCE: f64 = 1e-3;
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("kernel parameters must be finite and positive (gamma = {gamma}, c = {c})")]
    Params { gamma: f64, c: f64 },
    #[error("training features have zero variance")]
    ZeroVariance,
    #[error("feature length mismatch: {expected} vs {found}")]
    Length { expected: usize, found: usize },
    #[error("labels must be -1 or +1, got {0}")]
    Label(f64),
    #[error("training set needs both classes")]
    SingleClass,
    #[error("{samples} samples but {labels} labels")]
    Count { samples: usize, labels: usize },
    #[error("malformed model json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub gamma: f64,
    pub c: f64,
}

impl KernelParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self, SvmError> {
        if !(gamma > 0.0 && gamma.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(SvmError::Params { gamma, c });
        }
        Ok(KernelParams { gamma, c })
    }

    /// `C = 1` with `γ` from [`rbf_gamma`].
    pub fn for_training(features: ArrayView2<'_, f64>) -> Result<Self, SvmError> {
        KernelParams::new(rbf_gamma(features)?, 1.0)
    }
}

/// `1 / (n_feat · Var(X))` with the population variance over every entry.
pub fn rbf_gamma(features: ArrayView2<'_, f64>) -> Result<f64, SvmError> {
    let n = features.len();
    if n == 0 {
        return Err(SvmError::ZeroVariance);
    }
    let mean = features.sum() / n as f64;
    let var = features.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(SvmError::ZeroVariance);
    }
    Ok(1.0 / (features.ncols() as f64 * var))
}

pub fn rbf_kernel(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> Result<f64, SvmError> {
    if a.len() != b.len() {
        return Err(SvmError::Length { expected: a.len(), found: b.len() });
    }
    Ok(rbf_unchecked(a, b, gamma))
}

fn rbf_unchecked(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Array2<f64>,
    /// `α_i · y_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub params: KernelParams,
}

/// Solver diagnostics. `converged == false` means the pair-update cap was
/// hit; the model is still usable at the achieved `kkt_gap`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_gap: f64,
    pub dual_objective: f64,
    /// Full multiplier vector in input order.
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub model: SvmModel,
    pub stats: TrainStats,
}

fn content_cmp(x: ArrayView2<'_, f64>, y: &[f64], i: usize, j: usize) -> Ordering {
    for (a, b) in x.row(i).iter().zip(x.row(j).iter()) {
        match a.total_cmp(b) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    y[i].total_cmp(&y[j])
}

/// Trains on rows of `features` with labels in `{−1, +1}`.
pub fn train(features: ArrayView2<'_, f64>, labels: &[f64], params: KernelParams) -> Result<Trained, SvmError> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(SvmError::Count { samples: n, labels: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(SvmError::Label(bad));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(SvmError::SingleClass);
    }
    let y = labels;
    let c = params.c;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| content_cmp(features, y, i, j));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        q[[i, i]] = 1.0;
        for j in 0..i {
            let k = y[i] * y[j] * rbf_unchecked(features.row(i), features.row(j), params.gamma);
            q[[i, j]] = k;
            q[[j, i]] = k;
        }
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let cap = 10 * n * n;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    loop {
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) {
                let better = match i_best {
                    None => true,
                    Some((b, bv)) => v > bv || (v == bv && rank[t] < rank[b]),
                };
                if better {
                    i_best = Some((t, v));
                }
            }
            if in_low(alpha[t], y[t]) {
                let better = match j_best {
                    None => true,
                    Some((b, bv)) => v < bv || (v == bv && rank[t] < rank[b]),
                };
                if better {
                    j_best = Some((t, v));
                }
            }
        }
        let (Some((i, m_up)), Some((j, m_low))) = (i_best, j_best) else {
            gap = 0.0;
            converged = true;
            break;
        };
        gap = m_up - m_low;
        if gap < KKT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == cap {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q[[i, i]] + q[[j, j]] + 2.0 * q[[i, j]]).max(MIN_CURVATURE);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q[[i, i]] + q[[j, j]] - 2.0 * q[[i, j]]).max(MIN_CURVATURE);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[[t, i]] * di + q[[t, j]] * dj;
        }
    }

    // ρ from free multipliers, midpoint of the feasible interval otherwise.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for &t in &order {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { 0.5 * (ub + lb) };

    let dual_objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let support: Vec<usize> = order.iter().copied().filter(|&t| alpha[t] > 0.0).collect();
    let d = features.ncols();
    let support_vectors = Array2::from_shape_fn((support.len(), d), |(r, k)| features[[support[r], k]]);
    let dual_coefficients = support.iter().map(|&t| alpha[t] * y[t]).collect();

    Ok(Trained {
        model: SvmModel { support_vectors, dual_coefficients, bias: -rho, params },
        stats: TrainStats { iterations, converged, kkt_gap: gap, dual_objective, alpha },
    })
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.ncols()
    }

    /// `Σ_i coef_i · k(sv_i, x) + bias`.
    pub fn decision_value(&self, x: ArrayView1<'_, f64>) -> Result<f64, SvmError> {
        if x.len() != self.n_features() {
            return Err(SvmError::Length { expected: self.n_features(), found: x.len() });
        }
        let mut acc = 0.0;
        for (sv, coef) in self.support_vectors.outer_iter().zip(&self.dual_coefficients) {
            acc += coef * rbf_unchecked(sv, x, self.params.gamma);
        }
        Ok(acc + self.bias)
    }

    /// Label `±1` (zero maps to `+1`) with the decision value.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64), SvmError> {
        let v = self.decision_value(x)?;
        Ok((if v >= 0.0 { 1.0 } else { -1.0 }, v))
    }

    /// JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"gamma\": {},", num(self.params.gamma));
        let _ = writeln!(s, "  \"c\": {},", num(self.params.c));
        let _ = writeln!(s, "  \"bias\": {},", num(self.bias));
        s.push_str("  \"support_vectors\": [");
        for (r, row) in self.support_vectors.outer_iter().enumerate() {
            if r > 0 {
                s.push(',');
            }
            s.push_str("\n    [");
            s.push_str(&row.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", "));
            s.push(']');
        }
        s.push_str("\n  ],\n  \"dual_coefficients\": [");
        s.push_str(&self.dual_coefficients.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", "));
        s.push_str("]\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        #[derive(Deserialize)]
        struct Raw {
            gamma: f64,
            c: f64,
            bias: f64,
            support_vectors: Vec<Vec<f64>>,
            dual_coefficients: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| SvmError::Json(e.to_string()))?;
        let d = raw.support_vectors.first().map_or(0, Vec::len);
        if raw.support_vectors.iter().any(|r| r.len() != d) || raw.support_vectors.len() != raw.dual_coefficients.len() {
            return Err(SvmError::Json("ragged support vectors".into()));
        }
        let flat: Vec<f64> = raw.support_vectors.into_iter().flatten().collect();
        let support_vectors =
            Array2::from_shape_vec((raw.dual_coefficients.len(), d), flat).map_err(|e| SvmError::Json(e.to_string()))?;
        Ok(SvmModel {
            support_vectors,
            dual_coefficients: raw.dual_coefficients,
            bias: raw.bias,
            params: KernelParams::new(raw.gamma, raw.c)?,
        })
    }
}
