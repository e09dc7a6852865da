#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use resofeat::signal::{synthesize, EffectDimension, SynthSpec};
use resofeat::svm::rbf_kernel;
use resofeat::{DatasetBundle, Label};

pub fn synth_spec(dim: EffectDimension, effect: f64, subjects_per_class: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n_subjects_per_class: subjects_per_class,
        samples_per_subject: 2,
        n_channels: 8,
        n_time: 1024,
        fs: 128.0,
        effect_dimension: dim,
        effect_size: effect,
        seed,
    }
}

pub fn synth(dim: EffectDimension, effect: f64, subjects_per_class: usize, seed: u64) -> DatasetBundle {
    synthesize(&synth_spec(dim, effect, subjects_per_class, seed)).unwrap()
}

/// Reassigns subject labels by a seeded shuffle, keeping the class counts.
pub fn permute_subject_labels(bundle: &DatasetBundle, seed: u64) -> DatasetBundle {
    let subjects = bundle.subjects();
    let mut labels: Vec<Label> = subjects.iter().map(|(_, l)| *l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::SliceRandom::shuffle(&mut labels[..], &mut rng);
    let mut out = bundle.clone();
    for s in &mut out.samples {
        let i = subjects.iter().position(|(id, _)| *id == s.subject_id).unwrap();
        s.label = labels[i];
    }
    out
}

/// Random two-class point cloud; class means differ by `shift` along every axis.
pub fn random_problem(n: usize, dim: usize, shift: f64, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    rand::seq::SliceRandom::shuffle(&mut y[..], &mut rng);
    let x = Array2::from_shape_fn((n, dim), |(i, _)| {
        let z: f64 = rng.sample(StandardNormal);
        z + 0.5 * shift * y[i]
    });
    (x, y)
}

pub fn q_matrix(x: ArrayView2<'_, f64>, y: &[f64], gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * rbf_kernel(x.row(i), x.row(j), gamma).unwrap())
}

/// `½ αᵀQα − Σα`.
pub fn dual_objective(q: &Array2<f64>, alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * q[[i, j]] * alpha[j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ α ≤ c, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let excess = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Dense reference solve of the soft-margin dual by accelerated projected
/// gradient. Returns the minimal objective.
pub fn reference_dual(q: &Array2<f64>, y: &[f64], c: f64, iterations: usize) -> f64 {
    let n = y.len();
    let lipschitz = (0..n).map(|i| (0..n).map(|j| q[[i, j]].abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0_f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[[i, j]] * z[j]).sum::<f64>() - 1.0).collect();
        let v: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&alpha).map(|(a, p)| a + (t - 1.0) / t_next * (a - p)).collect();
        alpha = next;
        t = t_next;
    }
    dual_objective(q, &alpha)
}
