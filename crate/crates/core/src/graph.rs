//! Weighted undirected attributed graphs, explanation subgraphs and edge
//! perturbation.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub type NodeId = usize;

/// Undirected edge stored in canonical `(min, max)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(NodeId, NodeId);

impl Edge {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        if u <= v {
            Edge(u, v)
        } else {
            Edge(v, u)
        }
    }

    #[inline]
    pub fn u(self) -> NodeId {
        self.0
    }

    #[inline]
    pub fn v(self) -> NodeId {
        self.1
    }

    #[inline]
    pub fn touches(self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }

    /// The endpoint that is not `n`, if `n` is an endpoint.
    pub fn other(self, n: NodeId) -> Option<NodeId> {
        if self.0 == n {
            Some(self.1)
        } else if self.1 == n {
            Some(self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// How an explanation's edges are applied to the input graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PerturbMode {
    /// Delete the edges.
    #[default]
    Remove,
    /// Keep the edges but multiply their weight by `factor`.
    Weaken { factor: f64 },
}

/// Read access to neighborhoods, shared by full graphs and perturbed views so
/// that the embedding forward pass runs identical arithmetic on both.
pub trait Topology {
    fn num_nodes(&self) -> usize;

    /// Calls `f(neighbor, weight)` for every neighbor of `v` in ascending id order.
    fn for_each_neighbor<F: FnMut(NodeId, f64)>(&self, v: NodeId, f: F);
}

#[derive(Clone, Debug)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
    adj: Vec<Vec<(NodeId, f64)>>,
    features: Arc<Matrix>,
    labels: Option<Arc<Vec<usize>>>,
}

impl Graph {
    /// Builds a graph from weighted edges. Duplicate edges keep the first weight.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
        features: Matrix,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::DimensionMismatch {
                context: "feature rows".into(),
                expected: num_nodes,
                found: features.rows(),
            });
        }
        let mut weighted: Vec<(Edge, f64)> = Vec::new();
        for (u, v, w) in edges {
            for n in [u, v] {
                if n >= num_nodes {
                    return Err(Error::NodeOutOfRange { node: n, num_nodes });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidWeight { u, v, weight: w });
            }
            weighted.push((Edge::new(u, v), w));
        }
        // stable sort keeps the first occurrence of a duplicate in front
        weighted.sort_by_key(|(e, _)| *e);
        weighted.dedup_by_key(|(e, _)| *e);
        let (edges, weights) = weighted.into_iter().unzip();
        Ok(Self::from_sorted(
            num_nodes,
            edges,
            weights,
            Arc::new(features),
            None,
        ))
    }

    /// Unit-weight convenience constructor.
    pub fn unweighted(
        num_nodes: usize,
        edges: &[(NodeId, NodeId)],
        features: Matrix,
    ) -> Result<Self> {
        Self::new(num_nodes, edges.iter().map(|&(u, v)| (u, v, 1.0)), features)
    }

    fn from_sorted(
        num_nodes: usize,
        edges: Vec<Edge>,
        weights: Vec<f64>,
        features: Arc<Matrix>,
        labels: Option<Arc<Vec<usize>>>,
    ) -> Self {
        // Iterating canonical edges in sorted order leaves every adjacency list sorted.
        let mut adj = vec![Vec::new(); num_nodes];
        for (e, &w) in edges.iter().zip(&weights) {
            adj[e.0].push((e.1, w));
            adj[e.1].push((e.0, w));
        }
        Self {
            num_nodes,
            edges,
            weights,
            adj,
            features,
            labels,
        }
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                context: "labels".into(),
                expected: self.num_nodes,
                found: labels.len(),
            });
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                context: "feature rows".into(),
                expected: self.num_nodes,
                found: features.rows(),
            });
        }
        self.features = Arc::new(features);
        Ok(self)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// All edges in canonical sorted order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weighted_edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.edges.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    pub fn weight(&self, e: Edge) -> Option<f64> {
        self.edges.binary_search(&e).ok().map(|i| self.weights[i])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.edges.binary_search(&Edge::new(u, v)).is_ok()
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v < self.num_nodes {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: v,
                num_nodes: self.num_nodes,
            })
        }
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: NodeId) -> Result<Vec<NodeId>> {
        self.check_node(v)?;
        Ok(self.adj[v].iter().map(|&(u, _)| u).collect())
    }

    /// Sorted `(neighbor, weight)` pairs; panics on an out-of-range node.
    #[inline]
    pub fn adjacency(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.adj[v]
    }

    pub fn avg_degree(&self) -> Result<f64> {
        if self.num_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(2.0 * self.edges.len() as f64 / self.num_nodes as f64)
    }

    /// Edges of the subgraph induced by `nodes`.
    pub fn induced_edges(&self, nodes: &BTreeSet<NodeId>) -> BTreeSet<Edge> {
        let mut out = BTreeSet::new();
        for &u in nodes {
            for &(w, _) in &self.adj[u] {
                if u < w && nodes.contains(&w) {
                    out.insert(Edge(u, w));
                }
            }
        }
        out
    }

    /// Nodes within `hops` of `v`, with their BFS distance.
    pub fn within_hops(&self, v: NodeId, hops: usize) -> Result<BTreeSet<NodeId>> {
        self.check_node(v)?;
        let mut dist = vec![usize::MAX; self.num_nodes];
        let mut queue = VecDeque::from([v]);
        dist[v] = 0;
        let mut seen = BTreeSet::from([v]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == hops {
                continue;
            }
            for &(w, _) in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    seen.insert(w);
                    queue.push_back(w);
                }
            }
        }
        Ok(seen)
    }

    /// Induced `hops`-hop ego network around `v`, importance unset.
    pub fn ego(&self, v: NodeId, hops: usize) -> Result<Explanation> {
        if hops == 0 {
            return Err(Error::InvalidConfig("ego network needs hops >= 1".into()));
        }
        let nodes = self.within_hops(v, hops)?;
        let edges = self.induced_edges(&nodes);
        Ok(Explanation {
            target: v,
            nodes,
            edges,
            importance: None,
        })
    }

    /// Removes the explanation's edges. The input graph is untouched.
    pub fn perturb(&self, expl: &Explanation) -> Result<Graph> {
        self.perturb_edges(&expl.edges, PerturbMode::Remove)
    }

    pub fn perturb_edges<'a>(
        &self,
        edges: impl IntoIterator<Item = &'a Edge>,
        mode: PerturbMode,
    ) -> Result<Graph> {
        let removed = self.edge_indices(edges)?;
        let mut keep = vec![true; self.edges.len()];
        let mut weights = self.weights.clone();
        for i in removed {
            match mode {
                PerturbMode::Remove => keep[i] = false,
                PerturbMode::Weaken { factor } => {
                    weights[i] = (weights[i] * factor).clamp(0.0, 1.0)
                }
            }
        }
        let (edges, weights) = self
            .edges
            .iter()
            .zip(weights)
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|((&e, w), _)| (e, w))
            .unzip();
        Ok(Self::from_sorted(
            self.num_nodes,
            edges,
            weights,
            Arc::clone(&self.features),
            self.labels.clone(),
        ))
    }

    fn edge_indices<'a>(&self, edges: impl IntoIterator<Item = &'a Edge>) -> Result<Vec<usize>> {
        edges
            .into_iter()
            .map(|e| {
                self.edges
                    .binary_search(e)
                    .map_err(|_| Error::MissingEdge(e.0, e.1))
            })
            .collect()
    }

    /// A borrowed view of this graph with `edges` perturbed.
    pub fn view<'a>(&'a self, edges: &'a [Edge], mode: PerturbMode) -> Result<PerturbedView<'a>> {
        debug_assert!(
            edges.windows(2).all(|w| w[0] < w[1]),
            "edges must be sorted and unique"
        );
        self.edge_indices(edges)?;
        Ok(PerturbedView {
            base: self,
            edges,
            mode,
        })
    }

    /// SHA-256 over node count, edges, weights, features and labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_nodes as u64).to_le_bytes());
        for (e, w) in self.weighted_edges() {
            h.update((e.0 as u64).to_le_bytes());
            h.update((e.1 as u64).to_le_bytes());
            h.update(w.to_bits().to_le_bytes());
        }
        self.features.hash_into(&mut h);
        if let Some(labels) = self.labels() {
            for &l in labels {
                h.update((l as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl Topology for Graph {
    fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(NodeId, f64)>(&self, v: NodeId, mut f: F) {
        for &(u, w) in &self.adj[v] {
            f(u, w);
        }
    }
}

/// Copy-free perturbation: the base graph with a sorted edge set removed or weakened.
#[derive(Clone, Copy, Debug)]
pub struct PerturbedView<'a> {
    base: &'a Graph,
    edges: &'a [Edge],
    mode: PerturbMode,
}

impl PerturbedView<'_> {
    pub fn touched_nodes(&self) -> BTreeSet<NodeId> {
        self.edges.iter().flat_map(|e| [e.0, e.1]).collect()
    }
}

impl Topology for PerturbedView<'_> {
    fn num_nodes(&self) -> usize {
        self.base.num_nodes
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(NodeId, f64)>(&self, v: NodeId, mut f: F) {
        let hit = |u: NodeId| self.edges.binary_search(&Edge::new(u, v)).is_ok();
        let touched = self.edges.iter().any(|e| e.touches(v));
        for &(u, w) in &self.base.adj[v] {
            if touched && hit(u) {
                match self.mode {
                    PerturbMode::Remove => {}
                    PerturbMode::Weaken { factor } => f(u, (w * factor).clamp(0.0, 1.0)),
                }
            } else {
                f(u, w);
            }
        }
    }
}

/// A subgraph rooted at a target node, optionally scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub target: NodeId,
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<Edge>,
    pub importance: Option<f64>,
}

impl Explanation {
    pub fn empty(target: NodeId) -> Self {
        Self {
            target,
            nodes: BTreeSet::from([target]),
            edges: BTreeSet::new(),
            importance: None,
        }
    }

    /// Nodes are the target plus every edge endpoint.
    pub fn from_edges(target: NodeId, edges: impl IntoIterator<Item = Edge>) -> Self {
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        let mut nodes: BTreeSet<NodeId> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
        nodes.insert(target);
        Self {
            target,
            nodes,
            edges,
            importance: None,
        }
    }

    pub fn with_importance(mut self, importance: f64) -> Self {
        self.importance = Some(importance);
        self
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_vec(&self) -> Vec<Edge> {
        self.edges.iter().copied().collect()
    }

    /// Checks the structural invariants against `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        g.check_node(self.target)?;
        if !self.nodes.contains(&self.target) {
            return Err(Error::InvalidConfig(format!(
                "explanation for {} does not contain its target",
                self.target
            )));
        }
        for e in &self.edges {
            if !g.has_edge(e.0, e.1) {
                return Err(Error::MissingEdge(e.0, e.1));
            }
            if !self.nodes.contains(&e.0) || !self.nodes.contains(&e.1) {
                return Err(Error::InvalidConfig(format!(
                    "edge {e} has an endpoint outside the node set"
                )));
            }
        }
        Ok(())
    }
}
