//! Motif benchmarks (BA-Shapes, Tree-Cycles, Tree-Grid) with ground-truth
//! explanation masks, and a loader for citation-network files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};
use crate::io;
use crate::linalg::Matrix;

/// Node features attached to generated graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureKind {
    /// All-ones vectors.
    #[default]
    Constant,
    /// A constant first column followed by i.i.d. standard normal entries.
    Gaussian,
    /// One-hot degree bucket (last bucket collects higher degrees) plus
    /// small seeded jitter on every entry.
    Degree { jitter: f64 },
}

/// Planted motifs and their member nodes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    motifs: Vec<Motif>,
    motif_of: BTreeMap<NodeId, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<Edge>,
}

impl GroundTruth {
    fn push(&mut self, nodes: BTreeSet<NodeId>, edges: BTreeSet<Edge>) {
        let id = self.motifs.len();
        for &n in &nodes {
            self.motif_of.insert(n, id);
        }
        self.motifs.push(Motif { nodes, edges });
    }

    pub fn is_empty(&self) -> bool {
        self.motifs.is_empty()
    }

    pub fn motifs(&self) -> &[Motif] {
        &self.motifs
    }

    pub fn in_motif(&self, v: NodeId) -> bool {
        self.motif_of.contains_key(&v)
    }

    pub fn motif_edges(&self, v: NodeId) -> Option<&BTreeSet<Edge>> {
        self.motif_of.get(&v).map(|&m| &self.motifs[m].edges)
    }

    pub fn motif_nodes(&self, v: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.motif_of.get(&v).map(|&m| &self.motifs[m].nodes)
    }

    /// All in-motif nodes, ascending.
    pub fn motif_members(&self) -> Vec<NodeId> {
        self.motif_of.keys().copied().collect()
    }

    /// One line per in-motif node: `node: u v; u v; ...`
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (&n, &m) in &self.motif_of {
            let _ = write!(s, "{n}:");
            for (i, e) in self.motifs[m].edges.iter().enumerate() {
                let sep = if i == 0 { " " } else { "; " };
                let _ = write!(s, "{sep}{} {}", e.u(), e.v());
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`GroundTruth::to_text`] output. Nodes sharing an identical edge
    /// set are grouped into one motif.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut by_edges: BTreeMap<Vec<Edge>, BTreeSet<NodeId>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (node, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `node: u v; ...`"))?;
            let node: NodeId = node
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad node `{node}`")))?;
            let mut edges = Vec::new();
            for pair in rest.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let mut it = pair.split_whitespace().map(str::parse::<NodeId>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(u)), Some(Ok(v)), None) => edges.push(Edge::new(u, v)),
                    _ => return Err(Error::parse(path, i + 1, format!("bad edge `{pair}`"))),
                }
            }
            edges.sort();
            by_edges.entry(edges).or_default().insert(node);
        }
        let mut gt = GroundTruth::default();
        let mut groups: Vec<_> = by_edges.into_iter().collect();
        groups.sort_by_key(|(_, nodes)| *nodes.first().expect("non-empty group"));
        for (edges, nodes) in groups {
            gt.push(nodes, edges.into_iter().collect());
        }
        Ok(gt)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &io::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaShapesParams {
    pub base_nodes: usize,
    pub n_motifs: usize,
    /// Edges added per new node in the preferential-attachment base.
    pub attach_m: usize,
    pub extra_edge_fraction: f64,
    pub feature_dim: usize,
    pub features: FeatureKind,
    /// When set, generation fails unless `base_nodes + 5 * n_motifs` equals it.
    pub total_nodes: Option<usize>,
}

impl Default for BaShapesParams {
    fn default() -> Self {
        Self {
            base_nodes: 300,
            n_motifs: 80,
            attach_m: 5,
            extra_edge_fraction: 0.1,
            feature_dim: 10,
            features: FeatureKind::Constant,
            total_nodes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeMotifParams {
    pub depth: usize,
    pub n_motifs: usize,
    pub feature_dim: usize,
    pub features: FeatureKind,
}

impl TreeMotifParams {
    pub fn cycles() -> Self {
        Self {
            depth: 8,
            n_motifs: 60,
            feature_dim: 10,
            features: FeatureKind::Constant,
        }
    }

    pub fn grids() -> Self {
        Self {
            n_motifs: 80,
            ..Self::cycles()
        }
    }
}

impl Default for TreeMotifParams {
    fn default() -> Self {
        Self::cycles()
    }
}

/// Accumulates edges and labels while a generator runs.
struct Builder {
    num_nodes: usize,
    edges: BTreeSet<Edge>,
    labels: Vec<usize>,
    gt: GroundTruth,
}

impl Builder {
    fn new() -> Self {
        Self {
            num_nodes: 0,
            edges: BTreeSet::new(),
            labels: Vec::new(),
            gt: GroundTruth::default(),
        }
    }

    fn add_nodes(&mut self, count: usize, label: usize) -> NodeId {
        let start = self.num_nodes;
        self.num_nodes += count;
        self.labels.resize(self.num_nodes, label);
        start
    }

    fn add_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        u != v && self.edges.insert(Edge::new(u, v))
    }

    /// Adds a motif with local edge list `local` and per-node labels, offset at
    /// the next free id; returns the first node id.
    fn add_motif(&mut self, local: &[(usize, usize)], labels: &[usize]) -> NodeId {
        let start = self.add_nodes(labels.len(), 0);
        for (i, &l) in labels.iter().enumerate() {
            self.labels[start + i] = l;
        }
        let edges: BTreeSet<Edge> = local
            .iter()
            .map(|&(a, b)| Edge::new(start + a, start + b))
            .collect();
        for e in &edges {
            self.edges.insert(*e);
        }
        let nodes = (start..start + labels.len()).collect();
        self.gt.push(nodes, edges);
        start
    }

    fn finish(
        self,
        feature_dim: usize,
        features: FeatureKind,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Graph, GroundTruth)> {
        let placeholder = Matrix::zeros(self.num_nodes, feature_dim);
        let g = Graph::new(
            self.num_nodes,
            self.edges.iter().map(|e| (e.u(), e.v(), 1.0)),
            placeholder,
        )?
        .with_labels(self.labels)?;
        let x = make_features(&g, feature_dim, features, rng);
        Ok((g.with_features(x)?, self.gt))
    }
}

/// Builds a feature matrix for `g` of the requested kind.
pub fn make_features(g: &Graph, dim: usize, kind: FeatureKind, rng: &mut impl Rng) -> Matrix {
    let n = g.num_nodes();
    match kind {
        FeatureKind::Constant => Matrix::filled(n, dim, 1.0),
        FeatureKind::Gaussian => {
            let mut m = Matrix::zeros(n, dim);
            for i in 0..n {
                let row = m.row_mut(i);
                row[0] = 1.0;
                for x in row.iter_mut().skip(1) {
                    *x = standard_normal(rng);
                }
            }
            m
        }
        FeatureKind::Degree { jitter } => {
            let mut m = Matrix::zeros(n, dim);
            for i in 0..n {
                let bucket = g.degree(i).min(dim.saturating_sub(1));
                let row = m.row_mut(i);
                if dim > 0 {
                    row[bucket] = 1.0;
                }
                for x in row.iter_mut() {
                    *x += jitter * standard_normal(rng);
                }
            }
            m
        }
    }
}

/// Box-Muller; keeps the dependency set to `rand` alone.
pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Preferential attachment: a star on `m + 1` nodes, then each new node links
/// to `m` distinct existing nodes drawn proportionally to degree.
fn barabasi_albert(b: &mut Builder, n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    if m == 0 || n < m + 1 {
        return Err(Error::InvalidConfig(format!(
            "preferential attachment needs 1 <= m < n (m = {m}, n = {n})"
        )));
    }
    let start = b.add_nodes(n, 0);
    let mut repeated: Vec<NodeId> = Vec::new();
    for leaf in 1..=m {
        b.add_edge(start, start + leaf);
        repeated.extend([start, start + leaf]);
    }
    for source in (start + m + 1)..(start + n) {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(*repeated.choose(rng).expect("non-empty"));
        }
        for &t in &targets {
            b.add_edge(source, t);
        }
        repeated.extend(targets);
        repeated.extend(std::iter::repeat_n(source, m));
    }
    Ok(())
}

const HOUSE_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)];
/// Upper corners, bottom corners, roof.
const HOUSE_LABELS: [usize; 5] = [1, 1, 2, 2, 3];

/// BA base graph with house motifs, each bridged to a random base node, plus
/// random noise edges.
pub fn gen_ba_shapes(seed: u64, params: &BaShapesParams) -> Result<(Graph, GroundTruth)> {
    if params.base_nodes < 5 {
        return Err(Error::InvalidConfig(
            "BA-Shapes needs at least 5 base nodes".into(),
        ));
    }
    let n_total = params.base_nodes + 5 * params.n_motifs;
    if let Some(requested) = params.total_nodes {
        if requested != n_total {
            return Err(Error::InvalidConfig(format!(
                "{} base nodes + 5 x {} motifs = {n_total} nodes, but {requested} were requested",
                params.base_nodes, params.n_motifs
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    barabasi_albert(&mut b, params.base_nodes, params.attach_m, &mut rng)?;
    for _ in 0..params.n_motifs {
        let s = b.add_motif(&HOUSE_EDGES, &HOUSE_LABELS);
        let anchor = rng.random_range(0..params.base_nodes);
        b.add_edge(s, anchor);
    }
    let noise = (params.extra_edge_fraction * n_total as f64).floor() as usize;
    let mut added = 0;
    while added < noise {
        let u = rng.random_range(0..n_total);
        let v = rng.random_range(0..n_total);
        if b.add_edge(u, v) {
            added += 1;
        }
    }
    b.finish(params.feature_dim, params.features, &mut rng)
}

fn balanced_tree(b: &mut Builder, depth: usize) -> usize {
    let n = (1usize << (depth + 1)) - 1;
    b.add_nodes(n, 0);
    for i in 1..n {
        b.add_edge((i - 1) / 2, i);
    }
    n
}

fn tree_with_motifs(
    seed: u64,
    params: &TreeMotifParams,
    local: &[(usize, usize)],
    labels: &[usize],
) -> Result<(Graph, GroundTruth)> {
    if params.depth == 0 {
        return Err(Error::InvalidConfig("tree depth must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    let tree_nodes = balanced_tree(&mut b, params.depth);
    for _ in 0..params.n_motifs {
        let s = b.add_motif(local, labels);
        let anchor = rng.random_range(0..tree_nodes);
        b.add_edge(s, anchor);
    }
    b.finish(params.feature_dim, params.features, &mut rng)
}

/// Balanced binary tree with 6-cycles attached.
pub fn gen_tree_cycles(seed: u64, params: &TreeMotifParams) -> Result<(Graph, GroundTruth)> {
    let cycle: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
    tree_with_motifs(seed, params, &cycle, &[1; 6])
}

/// Balanced binary tree with 3x3 grids attached.
pub fn gen_tree_grid(seed: u64, params: &TreeMotifParams) -> Result<(Graph, GroundTruth)> {
    let mut grid = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let i = r * 3 + c;
            if c < 2 {
                grid.push((i, i + 1));
            }
            if r < 2 {
                grid.push((i, i + 3));
            }
        }
    }
    tree_with_motifs(seed, params, &grid, &[1; 9])
}

/// Loads a citation network: an edge list whose ids are either dense integers
/// or external names listed in the label file, a feature CSV (row `i` = node
/// `i`) and an optional `node,class` label file. Class names are densified in
/// order of first appearance; duplicate edges collapse.
pub fn load_citation(
    edge_path: &Path,
    feature_path: &Path,
    label_path: Option<&Path>,
) -> Result<Graph> {
    let features = io::read_matrix_csv(feature_path)?;
    let n = features.rows();

    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels = None;
    if let Some(lp) = label_path {
        let text = io::read_to_string(lp)?;
        let rows = io::parse_label_tokens(lp, &text)?;
        let mut classes: HashMap<String, usize> = HashMap::new();
        let mut lab = vec![None; n];
        for (row, (line, node, class)) in rows.into_iter().enumerate() {
            let dense = match node.parse::<NodeId>() {
                Ok(id) => id,
                Err(_) => row,
            };
            if dense >= n {
                return Err(Error::parse(
                    lp,
                    line,
                    format!("node {node} exceeds the {n} feature rows"),
                ));
            }
            ids.insert(node, dense);
            let next = classes.len();
            let c = *classes.entry(class).or_insert(next);
            lab[dense] = Some(c);
        }
        let lab: Option<Vec<usize>> = lab.into_iter().collect();
        labels =
            Some(lab.ok_or_else(|| Error::parse(lp, 0, "label file does not cover every node"))?);
    }

    let text = io::read_to_string(edge_path)?;
    let mut edges = Vec::new();
    for (line, u, v, w) in io::parse_edge_tokens(edge_path, &text)? {
        let resolve = |tok: &str| -> Result<NodeId> {
            let id = match ids.get(tok) {
                Some(&id) => id,
                None => tok
                    .parse::<NodeId>()
                    .map_err(|_| Error::parse(edge_path, line, format!("unknown node `{tok}`")))?,
            };
            if id >= n {
                return Err(Error::DimensionMismatch {
                    context: format!("{}:{line} node id vs feature rows", edge_path.display()),
                    expected: n,
                    found: id + 1,
                });
            }
            Ok(id)
        };
        let (a, b) = (resolve(&u)?, resolve(&v)?);
        if a != b {
            edges.push((a, b, w));
        }
    }
    let g = Graph::new(n, edges, features)?;
    match labels {
        Some(l) => g.with_labels(l),
        None => Ok(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gt(g: &Graph, gt: &GroundTruth) {
        let mut seen = BTreeSet::new();
        for m in gt.motifs() {
            for &n in &m.nodes {
                assert!(seen.insert(n), "motifs overlap at {n}");
                assert!(!gt.motif_edges(n).unwrap().is_empty());
            }
            for e in &m.edges {
                assert!(g.has_edge(e.u(), e.v()));
            }
        }
    }

    #[test]
    fn ba_shapes_defaults() {
        let (g, gt) = gen_ba_shapes(0, &BaShapesParams::default()).unwrap();
        assert_eq!(g.num_nodes(), 700);
        let e = g.num_edges() as f64;
        assert!((e - 2055.0).abs() <= 205.5, "{e} edges");
        assert_eq!(gt.motifs().len(), 80);
        assert_eq!(gt.motif_members().len(), 400);
        check_gt(&g, &gt);
        assert_eq!(g.num_classes(), Some(4));
        assert!((g.avg_degree().unwrap() - 2.0 * 2055.0 / 700.0).abs() < 0.6);
    }

    #[test]
    fn ba_shapes_without_motifs() {
        let p = BaShapesParams {
            n_motifs: 0,
            ..Default::default()
        };
        let (g, gt) = gen_ba_shapes(3, &p).unwrap();
        assert_eq!(g.num_nodes(), 300);
        assert!(gt.is_empty());
    }

    #[test]
    fn ba_shapes_total_mismatch() {
        let p = BaShapesParams {
            total_nodes: Some(701),
            ..Default::default()
        };
        assert!(matches!(gen_ba_shapes(0, &p), Err(Error::InvalidConfig(_))));
        let p = BaShapesParams {
            total_nodes: Some(700),
            ..Default::default()
        };
        assert!(gen_ba_shapes(0, &p).is_ok());
    }

    #[test]
    fn house_motif_edges() {
        let (g, gt) = gen_ba_shapes(1, &BaShapesParams::default()).unwrap();
        let m = &gt.motifs()[0];
        assert_eq!(m.nodes.len(), 5);
        assert_eq!(m.edges.len(), 6);
        let roof = *m.nodes.last().unwrap();
        assert_eq!(g.labels().unwrap()[roof], 3);
    }

    #[test]
    fn tree_cycles_defaults() {
        let (g, gt) = gen_tree_cycles(0, &TreeMotifParams::cycles()).unwrap();
        assert_eq!(g.num_nodes(), 871);
        assert!(
            (g.num_edges() as f64 - 971.0).abs() <= 97.1,
            "{}",
            g.num_edges()
        );
        check_gt(&g, &gt);
    }

    #[test]
    fn tree_cycles_single_motif() {
        let p = TreeMotifParams {
            n_motifs: 1,
            ..TreeMotifParams::cycles()
        };
        let (g, gt) = gen_tree_cycles(0, &p).unwrap();
        assert_eq!(g.num_nodes(), 517);
        assert_eq!(gt.motifs().len(), 1);
        assert_eq!(gt.motifs()[0].edges.len(), 6);
    }

    #[test]
    fn tree_grid_defaults() {
        let (g, gt) = gen_tree_grid(0, &TreeMotifParams::grids()).unwrap();
        assert_eq!(g.num_nodes(), 1231);
        assert!(
            (g.num_edges() as f64 - 1565.0).abs() <= 156.5,
            "{}",
            g.num_edges()
        );
        check_gt(&g, &gt);
        let p = TreeMotifParams {
            n_motifs: 1,
            ..TreeMotifParams::grids()
        };
        let (_, gt) = gen_tree_grid(0, &p).unwrap();
        for n in gt.motif_members() {
            assert_eq!(gt.motif_edges(n).unwrap().len(), 12);
        }
        assert_eq!(gt.motif_members().len(), 9);
    }

    #[test]
    fn depth_zero_rejected() {
        let p = TreeMotifParams {
            depth: 0,
            ..Default::default()
        };
        assert!(gen_tree_cycles(0, &p).is_err());
    }

    #[test]
    fn ground_truth_text_round_trip() {
        let (_, gt) = gen_tree_grid(
            5,
            &TreeMotifParams {
                n_motifs: 3,
                ..TreeMotifParams::grids()
            },
        )
        .unwrap();
        let back = GroundTruth::parse(Path::new("gt"), &gt.to_text()).unwrap();
        assert_eq!(back, gt);
    }

    #[test]
    fn load_citation_small() {
        let dir = tempfile::tempdir().unwrap();
        let e = dir.path().join("e.txt");
        let f = dir.path().join("f.csv");
        std::fs::write(&e, "0 1\n1 2\n").unwrap();
        std::fs::write(&f, "1,0\n0,1\n1,1\n").unwrap();
        let g = load_citation(&e, &f, None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);

        std::fs::write(&e, "0 1\n1 2\n1 0\n0 1\n").unwrap();
        assert_eq!(load_citation(&e, &f, None).unwrap().num_edges(), 2);

        std::fs::write(&e, "0 1\n1 7\n").unwrap();
        assert!(matches!(
            load_citation(&e, &f, None),
            Err(Error::DimensionMismatch { .. })
        ));

        std::fs::write(&e, "0 1\n1\n").unwrap();
        let err = load_citation(&e, &f, None).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn load_citation_named_ids() {
        let dir = tempfile::tempdir().unwrap();
        let e = dir.path().join("e.txt");
        let f = dir.path().join("f.csv");
        let l = dir.path().join("l.csv");
        std::fs::write(&e, "paperA paperC\npaperB paperA\n").unwrap();
        std::fs::write(&f, "1,0\n0,1\n1,1\n").unwrap();
        std::fs::write(&l, "node,class\npaperA,Theory\npaperB,RL\npaperC,Theory\n").unwrap();
        let g = load_citation(&e, &f, Some(&l)).unwrap();
        assert!(g.has_edge(0, 2) && g.has_edge(0, 1));
        assert_eq!(g.labels().unwrap(), &[0, 1, 0]);
    }
}
