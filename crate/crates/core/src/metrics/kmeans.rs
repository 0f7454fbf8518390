use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};
use crate::sage::Rows;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
}

/// Seeded k-means++ starts per fit.
pub const N_INIT: usize = 10;

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest_centroid(centroids: &Matrix, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = euclidean(centroids.row(c), x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Best of [`N_INIT`] runs of k-means++ seeding followed by Lloyd iterations
/// until the assignment stops changing or `max_iters` rounds have run. The
/// lowest-inertia run wins, the earliest on ties. Empty clusters keep their
/// centroid.
pub fn kmeans<R: Rows + ?Sized>(
    data: &R,
    n: usize,
    n_clusters: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeans> {
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidConfig(format!(
            "k-means needs 1 <= clusters <= points (clusters = {n_clusters}, points = {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..N_INIT {
        let run = lloyd(data, n, n_clusters, &mut rng, max_iters);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

fn lloyd<R: Rows + ?Sized>(
    data: &R,
    n: usize,
    n_clusters: usize,
    rng: &mut ChaCha8Rng,
    max_iters: usize,
) -> KMeans {
    let d = data.row(0).len();
    let mut centroids = Matrix::zeros(n_clusters, d);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| euclidean(data.row(i), data.row(first)).powi(2))
        .collect();
    for c in 1..n_clusters {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(euclidean(data.row(i), data.row(pick)).powi(2));
        }
    }

    let mut assignment: Vec<usize> = (0..n)
        .map(|i| nearest_centroid(&centroids, data.row(i)))
        .collect();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = Matrix::zeros(n_clusters, d);
        let mut counts = vec![0usize; n_clusters];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums.row_mut(a).iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        let next: Vec<usize> = (0..n)
            .map(|i| nearest_centroid(&centroids, data.row(i)))
            .collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = (0..n)
        .map(|i| euclidean(data.row(i), centroids.row(assignment[i])).powi(2))
        .sum();
    KMeans {
        assignment,
        centroids,
        iterations,
        inertia,
    }
}

/// Fraction of point pairs on which two clusterings agree about being
/// together or apart (Rand index).
pub fn pair_agreement(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}
