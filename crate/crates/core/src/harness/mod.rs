//! Resolution sweep: enumerate every feasible feature triple under a fixed
//! budget and score each one with subject-grouped cross-validation.
//!
//! Everything a fold learns (channel graph, kernel width, SVM) is fitted on
//! that fold's training subjects only. Task seeds are derived from the base
//! seed, the config triple and the fold index, so results do not depend on
//! evaluation order or thread count.

mod report;

pub use report::{edge_traversal, export_report, load_result, write_edge_csv, EdgePoint};

use crate::features::{segment_count, segment_length, spectro_temporal, FeatureConfig, FeatureError, PooledTensor};
use crate::graph::{fit_channel_graph, pool_spatial, ChannelGraph, GraphError};
use crate::seed::derive_seed;
use crate::signal::{DatasetBundle, Label, SignalError, SignalSample};
use crate::svm::{train, KernelParams, SvmError, SvmModel};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("no feasible configuration for budget {0}")]
    EmptyGrid(usize),
    #[error("invalid fold request: {0}")]
    Folds(String),
    #[error("fold {0} has a single-class training set")]
    DegenerateFold(usize),
    #[error("subject {0} is not assigned to a fold")]
    UnknownSubject(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl HarnessError {
    /// Failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HarnessError::Graph(GraphError::EigenNoConvergence(_))
                | HarnessError::Feature(FeatureError::ZeroWindow(_))
                | HarnessError::Svm(SvmError::ZeroVariance)
                | HarnessError::Graph(GraphError::Feature(FeatureError::ZeroWindow(_)))
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConstraints {
    pub n_c: usize,
    pub fs: f64,
    pub f_max: f64,
    pub min_n_t: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigGrid {
    pub budget: usize,
    pub configs: Vec<FeatureConfig>,
    pub constraints: GridConstraints,
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Whether `(n_f, n_t, n_g)` can be extracted from recordings of at least
/// `min_n_t` points on `n_c` channels.
pub fn is_feasible(n_f: usize, n_t: usize, n_g: usize, c: &GridConstraints) -> bool {
    if n_g > c.n_c {
        return false;
    }
    let Ok(seg) = segment_length(n_f, c.fs, c.f_max) else {
        return false;
    };
    // length-2 Hanning windows are identically zero
    if seg < 3 || n_f > seg || seg > c.min_n_t {
        return false;
    }
    segment_count(c.min_n_t, seg).is_ok_and(|n_seg| n_t <= n_seg)
}

/// All ordered divisor triples of `budget` that pass [`is_feasible`], sorted
/// lexicographically by `(n_f, n_t, n_g)`.
pub fn enumerate_configs(
    budget: usize,
    n_c: usize,
    min_n_t: usize,
    fs: f64,
    f_max: f64,
) -> Result<ConfigGrid, HarnessError> {
    let constraints = GridConstraints { n_c, fs, f_max, min_n_t };
    let mut configs = Vec::new();
    if budget >= 1 && f_max > 0.0 {
        for n_f in divisors(budget) {
            for n_t in divisors(budget / n_f) {
                let n_g = budget / n_f / n_t;
                if is_feasible(n_f, n_t, n_g, &constraints) {
                    configs.push(FeatureConfig::new(n_f, n_t, n_g, f_max)?);
                }
            }
        }
    }
    if configs.is_empty() {
        return Err(HarnessError::EmptyGrid(budget));
    }
    Ok(ConfigGrid { budget, configs, constraints })
}

/// Grid for a bundle's kept samples.
pub fn grid_for_bundle(bundle: &DatasetBundle, budget: usize, f_max: f64) -> Result<ConfigGrid, HarnessError> {
    let fs = bundle.fs().ok_or(HarnessError::EmptyGrid(budget))?;
    let min_n_t = bundle.kept().map(SignalSample::n_time).min().unwrap_or(0);
    enumerate_configs(budget, bundle.n_channels(), min_n_t, fs, f_max)
}

/// Subject → fold map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_of: BTreeMap<String, usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldSpec {
    pub fn fold(&self, subject: &str) -> Result<usize, HarnessError> {
        self.fold_of
            .get(subject)
            .copied()
            .ok_or_else(|| HarnessError::UnknownSubject(subject.to_string()))
    }

    pub fn subjects_in(&self, fold: usize) -> Vec<&str> {
        self.fold_of.iter().filter(|(_, &f)| f == fold).map(|(s, _)| s.as_str()).collect()
    }
}

/// Shuffles subjects by `seed`, then hands them out alternating between
/// classes, each to the fold with the fewest subjects (then fewest of the
/// same class, then lowest index).
pub fn grouped_kfold(subjects: &[(String, Label)], k: usize, seed: u64) -> Result<FoldSpec, HarnessError> {
    if k == 0 || k > subjects.len() {
        return Err(HarnessError::Folds(format!("{k} folds for {} subjects", subjects.len())));
    }
    let mut shuffled = subjects.to_vec();
    shuffled.sort_by(|a, b| a.0.cmp(&b.0));
    if shuffled.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(HarnessError::Folds("duplicate subject id".into()));
    }
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut by_class: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for (s, l) in shuffled {
        by_class[usize::from(u8::from(l))].push(s);
    }
    let mut queues = [by_class[0].iter(), by_class[1].iter()];
    let mut order = Vec::with_capacity(subjects.len());
    let mut turn = 0;
    loop {
        match queues[turn].next() {
            Some(s) => order.push((s.clone(), turn)),
            None => {
                // one class is used up; drain the other
                order.extend(queues[1 - turn].by_ref().map(|s| (s.clone(), 1 - turn)));
                break;
            }
        }
        turn = 1 - turn;
    }

    let mut size = vec![0usize; k];
    let mut class_count = vec![[0usize; 2]; k];
    let mut fold_of = BTreeMap::new();
    for (subject, class) in order {
        let f = (0..k).min_by_key(|&f| (size[f], class_count[f][class], f)).expect("k ≥ 1");
        size[f] += 1;
        class_count[f][class] += 1;
        fold_of.insert(subject, f);
    }
    Ok(FoldSpec { fold_of, k, seed })
}

/// Folds over the kept samples of a bundle.
pub fn folds_for_bundle(bundle: &DatasetBundle, k: usize, seed: u64) -> Result<FoldSpec, HarnessError> {
    let kept = DatasetBundle {
        samples: bundle.kept().cloned().collect(),
        ..DatasetBundle::new(bundle.name.clone(), bundle.channel_names.clone())
    };
    grouped_kfold(&kept.subjects(), k, seed)
}

/// The model one fold learns from its training subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldModel {
    pub graph: ChannelGraph,
    pub svm: SvmModel,
}

impl FoldModel {
    pub fn features(&self, pooled: &PooledTensor) -> Result<Vec<f64>, HarnessError> {
        Ok(pool_spatial(pooled, &self.graph.assignment)?.flatten())
    }

    /// Predicted label and decision value for one recording.
    pub fn predict_sample(&self, sample: &SignalSample, config: &FeatureConfig) -> Result<(Label, f64), HarnessError> {
        self.predict_pooled(&spectro_temporal(sample, config)?)
    }

    fn predict_pooled(&self, pooled: &PooledTensor) -> Result<(Label, f64), HarnessError> {
        let x = self.features(pooled)?;
        let (sign, value) = self.svm.predict(ndarray::ArrayView1::from(&x[..]))?;
        Ok((Label::from_sign(sign), value))
    }
}

fn task_seed(base: u64, config: &FeatureConfig, fold: usize) -> u64 {
    derive_seed(base, &[config.n_f_feat as u64, config.n_t_feat as u64, config.n_g_feat as u64, fold as u64])
}

fn fit_fold(
    train_samples: &[&SignalSample],
    train_pooled: &[&PooledTensor],
    config: &FeatureConfig,
    seed: u64,
    fold: usize,
) -> Result<FoldModel, HarnessError> {
    let labels: Vec<f64> = train_samples.iter().map(|s| s.label.sign()).collect();
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(HarnessError::DegenerateFold(fold));
    }
    let graph = fit_channel_graph(train_samples.iter().copied(), config.n_g_feat, seed)?;
    let n_feat = config.n_feat_budget;
    let mut x = Array2::zeros((train_pooled.len(), n_feat));
    for (mut row, p) in x.outer_iter_mut().zip(train_pooled) {
        let f = pool_spatial(p, &graph.assignment)?.flatten();
        row.assign(&ndarray::ArrayView1::from(&f[..]));
    }
    let params = KernelParams::for_training(x.view())?;
    let svm = train(x.view(), &labels, params)?.model;
    Ok(FoldModel { graph, svm })
}

/// Trains the model of `fold` from the bundle's kept samples whose subjects
/// lie in other folds.
pub fn train_fold(
    bundle: &DatasetBundle,
    config: &FeatureConfig,
    folds: &FoldSpec,
    fold: usize,
) -> Result<FoldModel, HarnessError> {
    let mut train_samples = Vec::new();
    for s in bundle.kept() {
        if folds.fold(&s.subject_id)? != fold {
            train_samples.push(s);
        }
    }
    let pooled = train_samples
        .par_iter()
        .map(|s| spectro_temporal(s, config))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&PooledTensor> = pooled.iter().collect();
    fit_fold(&train_samples, &refs, config, task_seed(folds.seed, config, fold), fold)
}

/// Per-fold test accuracies for one configuration.
pub fn evaluate_config(
    bundle: &DatasetBundle,
    config: &FeatureConfig,
    folds: &FoldSpec,
) -> Result<Vec<f64>, HarnessError> {
    let samples: Vec<&SignalSample> = bundle.kept().collect();
    let fold_idx = samples.iter().map(|s| folds.fold(&s.subject_id)).collect::<Result<Vec<_>, _>>()?;
    let pooled = samples
        .par_iter()
        .map(|s| spectro_temporal(s, config))
        .collect::<Result<Vec<_>, _>>()?;

    (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let (mut tr_s, mut tr_p, mut te) = (Vec::new(), Vec::new(), Vec::new());
            for (i, &f) in fold_idx.iter().enumerate() {
                if f == fold {
                    te.push(i);
                } else {
                    tr_s.push(samples[i]);
                    tr_p.push(&pooled[i]);
                }
            }
            if te.is_empty() {
                return Err(HarnessError::Folds(format!("fold {fold} has no test samples")));
            }
            let model = fit_fold(&tr_s, &tr_p, config, task_seed(folds.seed, config, fold), fold)?;
            let mut correct = 0usize;
            for &i in &te {
                if model.predict_pooled(&pooled[i])?.0 == samples[i].label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / te.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub n_f_feat: usize,
    pub n_t_feat: usize,
    pub n_g_feat: usize,
    pub mean_accuracy: Option<f64>,
    pub fold_accuracies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ConfigResult {
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.n_f_feat, self.n_t_feat, self.n_g_feat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub dataset: String,
    pub budget: usize,
    pub f_max: f64,
    pub folds: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub n_subjects: usize,
    pub timestamp_unix: u64,
    #[serde(default)]
    pub flags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub results: Vec<ConfigResult>,
}

impl SweepResult {
    pub fn get(&self, triple: (usize, usize, usize)) -> Option<&ConfigResult> {
        self.results.iter().find(|r| r.triple() == triple)
    }

    /// Successful entries only.
    pub fn succeeded(&self) -> impl Iterator<Item = (&ConfigResult, f64)> {
        self.results.iter().filter_map(|r| r.mean_accuracy.map(|m| (r, m)))
    }
}

/// Evaluates every configuration of `grid`. Failures are recorded per
/// configuration. `threads = None` uses the global rayon pool.
pub fn run_sweep(
    bundle: &DatasetBundle,
    grid: &ConfigGrid,
    folds: &FoldSpec,
    threads: Option<usize>,
) -> Result<SweepResult, HarnessError> {
    if grid.configs.is_empty() {
        return Err(HarnessError::EmptyGrid(grid.budget));
    }
    let run = || -> Vec<ConfigResult> {
        grid.configs
            .par_iter()
            .map(|config| match evaluate_config(bundle, config, folds) {
                Ok(acc) => ConfigResult {
                    n_f_feat: config.n_f_feat,
                    n_t_feat: config.n_t_feat,
                    n_g_feat: config.n_g_feat,
                    mean_accuracy: Some(acc.iter().sum::<f64>() / acc.len() as f64),
                    fold_accuracies: acc,
                    error: None,
                },
                Err(e) => ConfigResult {
                    n_f_feat: config.n_f_feat,
                    n_t_feat: config.n_t_feat,
                    n_g_feat: config.n_g_feat,
                    mean_accuracy: None,
                    fold_accuracies: Vec::new(),
                    error: Some(e.to_string()),
                },
            })
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Threads(e.to_string()))?
            .install(run),
        None => run(),
    };

    let kept: Vec<&SignalSample> = bundle.kept().collect();
    let n_subjects = kept.iter().map(|s| s.subject_id.as_str()).collect::<std::collections::BTreeSet<_>>().len();
    Ok(SweepResult {
        metadata: SweepMetadata {
            dataset: bundle.name.clone(),
            budget: grid.budget,
            f_max: grid.constraints.f_max,
            folds: folds.k,
            seed: folds.seed,
            n_samples: kept.len(),
            n_subjects,
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            flags: BTreeMap::new(),
        },
        results,
    })
}
