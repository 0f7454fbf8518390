//! Exact and LSH-accelerated top-k neighbor search in embedding space.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::linalg::{dot, euclidean, Matrix};
use crate::sage::Rows;
use crate::synth::standard_normal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnResult {
    pub target: NodeId,
    pub neighbors: Vec<NodeId>,
    pub distances: Vec<f64>,
}

impl KnnResult {
    pub fn contains(&self, n: NodeId) -> bool {
        self.neighbors.contains(&n)
    }

    /// Members of `self` missing from `other`.
    pub fn displaced_by(&self, other: &KnnResult) -> usize {
        self.neighbors
            .iter()
            .filter(|n| !other.contains(**n))
            .count()
    }
}

/// `k` clamped to `n - 1`, warning when it had to be.
pub fn effective_k(k: usize, num_nodes: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if num_nodes < 2 {
        return Err(Error::InvalidConfig(format!(
            "nearest neighbors need at least 2 nodes (got {num_nodes})"
        )));
    }
    if k >= num_nodes {
        log::warn!(
            "k = {k} >= node count {num_nodes}; using k = {}",
            num_nodes - 1
        );
        return Ok(num_nodes - 1);
    }
    Ok(k)
}

#[inline]
fn by_distance_then_id(a: &(f64, NodeId), b: &(f64, NodeId)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest `(distance, id)` pairs in sorted order.
fn take_smallest(mut scored: Vec<(f64, NodeId)>, k: usize, target: NodeId) -> KnnResult {
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_distance_then_id);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance_then_id);
    KnnResult {
        target,
        neighbors: scored.iter().map(|s| s.1).collect(),
        distances: scored.iter().map(|s| s.0).collect(),
    }
}

/// Exact top-`k` by Euclidean distance over the first `num_nodes` rows,
/// excluding `v`; ties go to the smaller id.
pub fn knn_rows<R: Rows + ?Sized>(
    rows: &R,
    num_nodes: usize,
    v: NodeId,
    k: usize,
) -> Result<KnnResult> {
    if v >= num_nodes {
        return Err(Error::NodeOutOfRange { node: v, num_nodes });
    }
    let k = effective_k(k, num_nodes)?;
    let q = rows.row(v);
    let scored = (0..num_nodes)
        .filter(|&u| u != v)
        .map(|u| (euclidean(q, rows.row(u)), u))
        .collect();
    Ok(take_smallest(scored, k, v))
}

pub fn knn(emb: &Matrix, v: NodeId, k: usize) -> Result<KnnResult> {
    knn_rows(emb, emb.rows(), v, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LshParams {
    pub n_tables: usize,
    pub n_bits: usize,
    pub seed: u64,
}

impl Default for LshParams {
    fn default() -> Self {
        Self {
            n_tables: 16,
            n_bits: 5,
            seed: 0,
        }
    }
}

/// Sign-random-projection LSH over mean-centered embeddings. Candidates from
/// all tables are re-ranked exactly.
#[derive(Clone, Debug)]
pub struct LshIndex {
    data: Matrix,
    mean: Vec<f64>,
    /// `[table][bit]` hyperplane normals.
    planes: Vec<Vec<Vec<f64>>>,
    /// Per-node bucket key in each table.
    keys: Vec<Vec<u64>>,
    buckets: Vec<HashMap<u64, Vec<NodeId>>>,
}

pub fn build_lsh_index(emb: &Matrix, params: LshParams) -> Result<LshIndex> {
    if params.n_tables == 0 {
        return Err(Error::InvalidConfig("lsh n_tables must be positive".into()));
    }
    if params.n_bits > 64 {
        return Err(Error::InvalidConfig("lsh n_bits must be at most 64".into()));
    }
    let (n, d) = (emb.rows(), emb.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(emb.row(i)) {
            *m += x;
        }
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let planes: Vec<Vec<Vec<f64>>> = (0..params.n_tables)
        .map(|_| {
            (0..params.n_bits)
                .map(|_| (0..d).map(|_| standard_normal(&mut rng)).collect())
                .collect()
        })
        .collect();
    let mut index = LshIndex {
        data: emb.clone(),
        mean,
        planes,
        keys: Vec::with_capacity(n),
        buckets: vec![HashMap::new(); params.n_tables],
    };
    for i in 0..n {
        let keys: Vec<u64> = (0..params.n_tables)
            .map(|t| index.hash(t, emb.row(i)))
            .collect();
        for (t, &key) in keys.iter().enumerate() {
            index.buckets[t].entry(key).or_default().push(i);
        }
        index.keys.push(keys);
    }
    Ok(index)
}

impl LshIndex {
    fn hash(&self, table: usize, x: &[f64]) -> u64 {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.planes[table]
            .iter()
            .enumerate()
            .fold(0u64, |key, (b, p)| {
                if dot(&centered, p) >= 0.0 {
                    key | (1 << b)
                } else {
                    key
                }
            })
    }

    pub fn num_nodes(&self) -> usize {
        self.data.rows()
    }

    /// Approximate top-`k` for stored node `v`. Falls back to exact search
    /// when the buckets hold fewer than `k` candidates.
    pub fn query(&self, v: NodeId, k: usize) -> Result<KnnResult> {
        let n = self.num_nodes();
        if v >= n {
            return Err(Error::NodeOutOfRange {
                node: v,
                num_nodes: n,
            });
        }
        let k = effective_k(k, n)?;
        let mut seen = vec![false; n];
        seen[v] = true;
        let mut candidates = Vec::new();
        for (t, &key) in self.keys[v].iter().enumerate() {
            for &u in &self.buckets[t][&key] {
                if !seen[u] {
                    seen[u] = true;
                    candidates.push(u);
                }
            }
        }
        if candidates.len() < k {
            return knn_rows(&self.data, n, v, k);
        }
        let q = self.data.row(v);
        let scored = candidates
            .into_iter()
            .map(|u| (euclidean(q, self.data.row(u)), u))
            .collect();
        Ok(take_smallest(scored, k, v))
    }
}

/// Mean fraction of exact top-`k` neighbors recovered by the index over `queries`.
pub fn lsh_recall(index: &LshIndex, queries: &[NodeId], k: usize) -> Result<f64> {
    if queries.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for &q in queries {
        let exact = knn_rows(&index.data, index.num_nodes(), q, k)?;
        let approx = index.query(q, k)?;
        let hit = exact
            .neighbors
            .iter()
            .filter(|n| approx.contains(**n))
            .count();
        total += hit as f64 / exact.neighbors.len() as f64;
    }
    Ok(total / queries.len() as f64)
}
