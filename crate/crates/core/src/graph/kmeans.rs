//! Seeded k-means with k-means++ initialisation and restarts.
//!
//! Every source of nondeterminism is pinned: restart seeds are derived from
//! the base seed, ties go to the lowest cluster index, empty clusters are
//! refilled with the point farthest from its centroid, and the final labels
//! are renumbered by the smallest member index of each cluster.

use super::{ClusterAssignment, GraphError};
use crate::seed::derive_seed;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 300;

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_init(points: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // round-off can leave `acc` just short of `target`
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    Array2::from_shape_fn((k, points.ncols()), |(c, j)| points[[chosen[c], j]])
}

fn centroids_of(points: ArrayView2<'_, f64>, assign: &[usize], k: usize) -> Array2<f64> {
    let mut c = Array2::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (i, &g) in assign.iter().enumerate() {
        counts[g] += 1;
        let mut row = c.row_mut(g);
        row += &points.row(i);
    }
    for (g, &n) in counts.iter().enumerate() {
        if n > 0 {
            c.row_mut(g).mapv_inplace(|v| v / n as f64);
        }
    }
    c
}

/// Moves the farthest-from-centroid point of a multi-member cluster into
/// each empty cluster.
fn repair_empty(points: ArrayView2<'_, f64>, assign: &mut [usize], centroids: &mut Array2<f64>, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &g in assign.iter() {
            counts[g] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, &g) in assign.iter().enumerate() {
            if counts[g] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), centroids.row(g));
            if d > far.1 {
                far = (i, d);
            }
        }
        let (i, _) = far;
        let donor = assign[i];
        assign[i] = empty;
        centroids.row_mut(empty).assign(&points.row(i));
        let fresh = centroids_of(points, assign, k);
        centroids.row_mut(donor).assign(&fresh.row(donor));
    }
}

struct Run {
    assign: Vec<usize>,
    wcss: f64,
}

fn lloyd(points: ArrayView2<'_, f64>, k: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assign: Vec<usize> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<usize> = points.outer_iter().map(|p| nearest(p, &centroids).0).collect();
        repair_empty(points, &mut next, &mut centroids, k);
        let changed = next != assign;
        assign = next;
        centroids = centroids_of(points, &assign, k);
        if !changed {
            break;
        }
    }
    let wcss = assign
        .iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(points.row(i), centroids.row(g)))
        .sum();
    Run { assign, wcss }
}

/// Relabels clusters in order of their smallest member index.
pub fn canonical_labels(assign: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &g in assign {
        if map[g] == usize::MAX {
            map[g] = next;
            next += 1;
        }
    }
    assign.iter().map(|&g| map[g]).collect()
}

/// Clusters the rows of `points` into `n_clusters` groups.
pub fn kmeans(points: ArrayView2<'_, f64>, n_clusters: usize, seed: u64) -> Result<ClusterAssignment, GraphError> {
    let n = points.nrows();
    if n_clusters == 0 || n_clusters > n {
        return Err(GraphError::TooManyClusters { n_clusters, n_points: n });
    }
    let mut best: Option<Run> = None;
    for r in 0..RESTARTS {
        let run = lloyd(points, n_clusters, derive_seed(seed, &[r as u64]));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(ClusterAssignment {
        group_index: canonical_labels(&best.assign, n_clusters),
        n_clusters,
    })
}
