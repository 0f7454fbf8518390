//! Explanation quality metrics and report assembly.

mod classify;
mod kmeans;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, Graph, NodeId};
use crate::importance::Scorer;
use crate::knn::{knn_rows, KnnResult};
use crate::mcts::{explain, ExplainerConfig};
use crate::synth::GroundTruth;

pub use classify::{probe_accuracy, ProbeConfig};
pub use kmeans::{kmeans, nearest_centroid, pair_agreement, KMeans};
pub use report::{MethodSummary, MetricRow, MetricsReport, INPUT_GRAPH};

/// Share of explanation edges inside the target's motif, and share of motif
/// edges recovered. Both are 0 when their denominator is empty.
pub fn precision_recall(expl: &Explanation, gt: &GroundTruth) -> (f64, f64) {
    let empty = BTreeSet::new();
    let truth = gt.motif_edges(expl.target).unwrap_or(&empty);
    let hit = expl.edges.intersection(truth).count() as f64;
    let p = if expl.edges.is_empty() {
        0.0
    } else {
        hit / expl.edges.len() as f64
    };
    let r = if truth.is_empty() {
        0.0
    } else {
        hit / truth.len() as f64
    };
    (p, r)
}

/// Share of importances equal to 1.
pub fn validity(importances: &[f64]) -> f64 {
    if importances.is_empty() {
        return 0.0;
    }
    importances.iter().filter(|&&i| i == 1.0).count() as f64 / importances.len() as f64
}

/// Seeded edge split: returns the training graph and the held-out edges.
pub fn split_edges(g: &Graph, test_fraction: f64, seed: u64) -> Result<(Graph, Vec<Edge>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig(
            "test fraction must lie in [0, 1)".into(),
        ));
    }
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (edges.len() as f64 * test_fraction).round() as usize;
    let mut test: Vec<Edge> = edges[..n_test].to_vec();
    test.sort();
    let train = g.perturb_edges(&test, crate::graph::PerturbMode::Remove)?;
    Ok((train, test))
}

/// Held-out partners per node.
pub fn test_partners(test_edges: &[Edge]) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut m: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for e in test_edges {
        m.entry(e.u()).or_default().insert(e.v());
        m.entry(e.v()).or_default().insert(e.u());
    }
    m
}

fn hit(result: &KnnResult, partners: &BTreeSet<NodeId>) -> bool {
    result.neighbors.iter().any(|n| partners.contains(n))
}

/// Per-target hit-to-miss flag for Hit@k link prediction, or `None` when the
/// target has no held-out edge. `scorer` must wrap the training graph.
pub fn pn_flag(
    scorer: &Scorer,
    expl: &Explanation,
    partners: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    k: usize,
) -> Result<Option<bool>> {
    let Some(p) = partners.get(&expl.target) else {
        return Ok(None);
    };
    let before = scorer.base_knn(expl.target, k)?;
    let rows = scorer.perturbed(&expl.edge_vec())?;
    let after = knn_rows(&rows, scorer.graph().num_nodes(), expl.target, k)?;
    Ok(Some(hit(&before, p) && !hit(&after, p)))
}

/// Mean hit-to-miss rate over explained targets with held-out edges.
pub fn pn_hit_at_k(
    scorer: &Scorer,
    explanations: &[Explanation],
    test_edges: &[Edge],
    k: usize,
) -> Result<f64> {
    let partners = test_partners(test_edges);
    let mut flips = 0usize;
    let mut eligible = 0usize;
    for e in explanations {
        if let Some(f) = pn_flag(scorer, e, &partners, k)? {
            eligible += 1;
            flips += f as usize;
        }
    }
    Ok(if eligible == 0 {
        0.0
    } else {
        flips as f64 / eligible as f64
    })
}

/// Cluster-consistency probe with centroids frozen on the unperturbed embedding.
#[derive(Clone, Debug)]
pub struct HomogeneityProbe {
    clusters: KMeans,
    k: usize,
}

impl HomogeneityProbe {
    pub fn new(scorer: &Scorer, n_clusters: usize, k: usize, seed: u64) -> Result<Self> {
        let emb = scorer.embedding();
        let clusters = kmeans(emb, emb.rows(), n_clusters, seed, 300)?;
        Ok(Self { clusters, k })
    }

    pub fn clusters(&self) -> &KMeans {
        &self.clusters
    }

    /// Share of the target's original top-`k` neighbors that fall in the
    /// target's cluster after the explanation's edges are removed.
    pub fn homogeneity(&self, scorer: &Scorer, expl: &Explanation) -> Result<f64> {
        let v = expl.target;
        let before = scorer.base_knn(v, self.k)?;
        let rows = scorer.perturbed(&expl.edge_vec())?;
        let c = &self.clusters.centroids;
        use crate::sage::Rows;
        let home = nearest_centroid(c, rows.row(v));
        let same = before
            .neighbors
            .iter()
            .filter(|&&u| nearest_centroid(c, rows.row(u)) == home)
            .count();
        Ok(same as f64 / before.neighbors.len() as f64)
    }
}

/// One-shot form of [`HomogeneityProbe::homogeneity`].
pub fn homogeneity_after_perturb(
    scorer: &Scorer,
    expl: &Explanation,
    k: usize,
    n_clusters: usize,
    seed: u64,
) -> Result<f64> {
    HomogeneityProbe::new(scorer, n_clusters, k, seed)?.homogeneity(scorer, expl)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let (rx, ry) = (ranks(&xs[..n]), ranks(&ys[..n]));
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    K,
    PRestart,
    Lambda,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "k",
            SweepAxis::PRestart => "p_restart",
            SweepAxis::Lambda => "lambda",
        }
    }

    pub fn apply(self, base: &ExplainerConfig, value: f64) -> Result<ExplainerConfig> {
        let mut c = base.clone();
        match self {
            SweepAxis::K => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "k sweep values must be positive integers (got {value})"
                    )));
                }
                c.k = value as usize;
            }
            SweepAxis::PRestart => c.p_restart = value,
            SweepAxis::Lambda => c.lambda = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepAxis::K),
            "p_restart" | "p-restart" => Ok(SweepAxis::PRestart),
            "lambda" => Ok(SweepAxis::Lambda),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sweep axis `{s}` (expected k, p_restart or lambda)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_importance: f64,
    pub mean_size: f64,
}

/// Mean explanation importance over `targets` at each value of `axis`.
pub fn sensitivity_sweep(
    scorer: &Scorer,
    targets: &[NodeId],
    axis: SweepAxis,
    values: &[f64],
    base: &ExplainerConfig,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let cfg = axis.apply(base, value)?;
        let (mut imp, mut size) = (0.0, 0.0);
        for &v in targets {
            let r = explain(scorer, v, &cfg)?;
            imp += r.importance();
            size += r.explanation.size() as f64;
        }
        let n = targets.len().max(1) as f64;
        out.push(SweepPoint {
            value,
            mean_importance: imp / n,
            mean_size: size / n,
        });
    }
    Ok(out)
}

pub fn sweep_csv(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut s = format!("{},mean_importance,mean_size\n", axis.name());
    for p in points {
        s.push_str(&format!(
            "{},{},{}\n",
            p.value, p.mean_importance, p.mean_size
        ));
    }
    s
}
