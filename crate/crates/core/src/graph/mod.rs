//! Channel graph from functional connectivity, spectral clustering of the
//! channels, and spatial pooling of feature tensors.
//!
//! The adjacency is the absolute Pearson correlation between channels,
//! averaged over the training samples. Its unnormalised Laplacian
//! `L = D − A` is embedded with the eigenvectors of the `k` smallest
//! eigenvalues, the rows are clustered with k-means, and the resulting
//! channel groups define a group-averaging matrix along the channel axis.

mod eigen;
mod kmeans;

pub use eigen::{jacobi_eigen, SymmetricEigen, MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use kmeans::{canonical_labels, kmeans, MAX_ITERATIONS, RESTARTS};

use crate::features::{contract_axis, AssignmentMatrix, FeatureError, PooledTensor};
use crate::signal::SignalSample;
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("no training samples")]
    NoSamples,
    #[error("sample has {found} channels, expected {expected}")]
    Channels { expected: usize, found: usize },
    #[error("channel {0} is constant in every training sample")]
    ConstantChannel(usize),
    #[error("matrix is {0}×{1}, expected square")]
    NotSquare(usize, usize),
    #[error("eigensolver did not converge within {0} sweeps")]
    EigenNoConvergence(usize),
    #[error("embedding dimension {k} invalid for {n} nodes")]
    EmbedDim { k: usize, n: usize },
    #[error("{n_clusters} clusters requested for {n_points} points")]
    TooManyClusters { n_clusters: usize, n_points: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Symmetric, zero-diagonal channel affinity with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    pub values: Array2<f64>,
}

/// `L = diag(A·1) − A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix {
    pub values: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub group_index: Vec<usize>,
    pub n_clusters: usize,
}

/// Rows of the `k` lowest eigenvectors plus the full spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedding {
    pub points: Array2<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Pearson correlation of every channel pair; `None` where a channel is
/// constant in this sample.
fn abs_correlation(sample: &SignalSample) -> Vec<Option<f64>> {
    let n_c = sample.n_channels();
    let n_t = sample.n_time() as f64;
    let centred: Vec<Vec<f64>> = sample
        .data
        .outer_iter()
        .map(|row| {
            let mean = row.sum() / n_t;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centred.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut out = vec![None; n_c * n_c];
    for i in 0..n_c {
        for j in i + 1..n_c {
            if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
                let r = (dot / (norms[i] * norms[j])).abs().min(1.0);
                out[i * n_c + j] = Some(r);
                out[j * n_c + i] = Some(r);
            }
        }
    }
    out
}

/// Elementwise mean of per-sample absolute channel correlations.
///
/// A pair only averages over samples in which both channels vary. Sums run
/// in sample order, so the result does not depend on thread scheduling.
pub fn training_adjacency<'a, I>(samples: I) -> Result<AdjacencyMatrix, GraphError>
where
    I: IntoIterator<Item = &'a SignalSample>,
{
    let samples: Vec<&SignalSample> = samples.into_iter().collect();
    let first = samples.first().ok_or(GraphError::NoSamples)?;
    let n_c = first.n_channels();
    for s in &samples {
        if s.n_channels() != n_c {
            return Err(GraphError::Channels { expected: n_c, found: s.n_channels() });
        }
    }
    for c in 0..n_c {
        let varies = samples.iter().any(|s| {
            let row = s.data.row(c);
            row.iter().any(|&v| v != row[0])
        });
        if !varies {
            return Err(GraphError::ConstantChannel(c));
        }
    }

    let per_sample: Vec<Vec<Option<f64>>> = samples.par_iter().map(|s| abs_correlation(s)).collect();
    let mut sum = vec![0.0; n_c * n_c];
    let mut count = vec![0usize; n_c * n_c];
    for corr in &per_sample {
        for (k, r) in corr.iter().enumerate() {
            if let Some(r) = r {
                sum[k] += r;
                count[k] += 1;
            }
        }
    }
    let values = Array2::from_shape_fn((n_c, n_c), |(i, j)| {
        let k = i * n_c + j;
        if i == j || count[k] == 0 {
            0.0
        } else {
            sum[k] / count[k] as f64
        }
    });
    Ok(AdjacencyMatrix { values })
}

pub fn laplacian(a: &AdjacencyMatrix) -> LaplacianMatrix {
    let degree = a.values.sum_axis(Axis(1));
    let mut values = -a.values.clone();
    for (i, d) in degree.iter().enumerate() {
        values[[i, i]] += d;
    }
    LaplacianMatrix { values }
}

/// Embeds each node as the corresponding row of the `k` lowest
/// eigenvectors. Each eigenvector is flipped so that its largest-magnitude
/// entry (lowest index among near-ties) is positive.
pub fn spectral_embed(l: &LaplacianMatrix, k: usize) -> Result<SpectralEmbedding, GraphError> {
    let n = l.values.nrows();
    if k == 0 || k > n {
        return Err(GraphError::EmbedDim { k, n });
    }
    let eig = jacobi_eigen(l.values.view())?;
    let mut points = Array2::zeros((n, k));
    for c in 0..k {
        let mut u = eig.vectors.column(c).to_owned();
        let max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = u.iter().position(|v| v.abs() >= max - 1e-12 * max).unwrap_or(0);
        if u[lead] < 0.0 {
            u.mapv_inplace(|v| -v);
        }
        points.column_mut(c).assign(&u);
    }
    Ok(SpectralEmbedding { points, eigenvalues: eig.values })
}

pub fn spatial_assignment(ca: &ClusterAssignment, n_c: usize) -> Result<AssignmentMatrix, GraphError> {
    if ca.group_index.len() != n_c {
        return Err(FeatureError::Dimension { expected: n_c, found: ca.group_index.len() }.into());
    }
    Ok(AssignmentMatrix::from_groups(ca.group_index.clone(), ca.n_clusters)?)
}

/// Averages the channel axis within each cluster.
pub fn pool_spatial(x: &PooledTensor, s: &AssignmentMatrix) -> Result<PooledTensor, GraphError> {
    Ok(PooledTensor { values: contract_axis(x.values.view(), 0, s)? })
}

/// Everything learned from one training set.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGraph {
    pub adjacency: AdjacencyMatrix,
    pub embedding: SpectralEmbedding,
    pub clusters: ClusterAssignment,
    pub assignment: AssignmentMatrix,
}

/// Adjacency → Laplacian → embedding (dimension = cluster count) → k-means.
pub fn fit_channel_graph<'a, I>(training: I, n_clusters: usize, seed: u64) -> Result<ChannelGraph, GraphError>
where
    I: IntoIterator<Item = &'a SignalSample>,
{
    let adjacency = training_adjacency(training)?;
    let n_c = adjacency.values.nrows();
    let embedding = spectral_embed(&laplacian(&adjacency), n_clusters)?;
    let clusters = kmeans(embedding.points.view(), n_clusters, seed)?;
    let assignment = spatial_assignment(&clusters, n_c)?;
    Ok(ChannelGraph { adjacency, embedding, clusters, assignment })
}
