//! Counterfactual importance: the share of a target's top-k embedding
//! neighbors displaced once an explanation's edges are removed.
//!
//! [`importance`] is the reference: two full forward passes. [`Scorer`] caches
//! the unperturbed layer outputs and recomputes only the rows a perturbation
//! can reach, which is exact because every row goes through the same
//! arithmetic as the full pass.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::Result;
use crate::graph::{Edge, Explanation, Graph, NodeId, PerturbMode, Topology};
use crate::knn::{effective_k, knn, knn_rows, KnnResult};
use crate::linalg::Matrix;
use crate::sage::{Rows, SageModel};

fn score(original: &KnnResult, perturbed: &KnnResult) -> f64 {
    original.displaced_by(perturbed) as f64 / original.neighbors.len() as f64
}

/// `|set(kNN(emb, v, k)) - set(kNN(emb', v, k))| / k` with `emb'` embedded on
/// the graph minus the explanation's edges.
pub fn importance(
    model: &SageModel,
    g: &Graph,
    expl: &Explanation,
    v: NodeId,
    k: usize,
) -> Result<f64> {
    g.check_node(v)?;
    let perturbed = g.perturb(expl)?;
    let before = model.forward(g)?;
    let after = model.forward(&perturbed)?;
    let o = knn(&before.matrix, v, k)?;
    let n = knn(&after.matrix, v, k)?;
    Ok(score(&o, &n))
}

/// Layer rows that differ from a base matrix, addressed by node id.
#[derive(Clone, Debug)]
pub struct Overlay<'a> {
    base: &'a Matrix,
    slot: Vec<u32>,
    data: Vec<f64>,
}

const CLEAN: u32 = u32::MAX;

impl<'a> Overlay<'a> {
    fn new(base: &'a Matrix) -> Self {
        Self {
            base,
            slot: vec![CLEAN; base.rows()],
            data: Vec::new(),
        }
    }

    pub fn num_changed(&self) -> usize {
        self.data.len() / self.base.cols().max(1)
    }

    pub fn num_nodes(&self) -> usize {
        self.base.rows()
    }
}

impl Rows for Overlay<'_> {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let s = self.slot[i];
        if s == CLEAN {
            self.base.row(i)
        } else {
            let d = self.base.cols();
            let start = s as usize * d;
            &self.data[start..start + d]
        }
    }
}

/// Reusable importance evaluator for one `(model, graph)` pair.
#[derive(Clone, Debug)]
pub struct Scorer {
    model: Arc<SageModel>,
    graph: Arc<Graph>,
    layers: Arc<Vec<Matrix>>,
    mode: PerturbMode,
}

impl Scorer {
    pub fn new(model: Arc<SageModel>, graph: Arc<Graph>) -> Result<Self> {
        let layers = model.forward_layers(graph.as_ref(), graph.features())?;
        Ok(Self {
            model,
            graph,
            layers: Arc::new(layers),
            mode: PerturbMode::Remove,
        })
    }

    pub fn with_mode(mut self, mode: PerturbMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn model(&self) -> &SageModel {
        &self.model
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn mode(&self) -> PerturbMode {
        self.mode
    }

    /// The unperturbed embedding.
    pub fn embedding(&self) -> &Matrix {
        self.layers.last().expect("model has layers")
    }

    pub fn base_knn(&self, v: NodeId, k: usize) -> Result<KnnResult> {
        knn_rows(self.embedding(), self.graph.num_nodes(), v, k)
    }

    /// Final-layer rows after perturbing `edges` (sorted, unique).
    pub fn perturbed(&self, edges: &[Edge]) -> Result<Overlay<'_>> {
        let view = self.graph.view(edges, self.mode)?;
        let touched = view.touched_nodes();
        let features = self.graph.features();
        let mut prev: Option<Overlay<'_>> = None;
        let mut prev_dirty: BTreeSet<NodeId> = BTreeSet::new();
        for (l, base) in self.layers.iter().enumerate() {
            let mut dirty = touched.clone();
            for &u in &prev_dirty {
                dirty.insert(u);
                view.for_each_neighbor(u, |w, _| {
                    dirty.insert(w);
                });
            }
            let layer = &self.model.layers()[l];
            let mut agg = vec![0.0; layer.in_dim()];
            let mut out = Overlay::new(base);
            out.data = vec![0.0; dirty.len() * layer.out_dim()];
            for (i, &v) in dirty.iter().enumerate() {
                out.slot[v] = i as u32;
                let dst = &mut out.data[i * layer.out_dim()..(i + 1) * layer.out_dim()];
                match &prev {
                    None => self.model.layer_row(l, features, &view, v, &mut agg, dst),
                    Some(input) => self.model.layer_row(l, input, &view, v, &mut agg, dst),
                }
            }
            prev = Some(out);
            prev_dirty = dirty;
        }
        Ok(prev.expect("model has layers"))
    }

    /// Importance of removing `edges` (sorted, unique) for target `v`, given
    /// its unperturbed neighbor list.
    pub fn importance_against(&self, original: &KnnResult, edges: &[Edge]) -> Result<f64> {
        if edges.is_empty() {
            return Ok(0.0);
        }
        let rows = self.perturbed(edges)?;
        let after = knn_rows(
            &rows,
            self.graph.num_nodes(),
            original.target,
            original.neighbors.len(),
        )?;
        Ok(score(original, &after))
    }

    pub fn importance(&self, edges: &[Edge], v: NodeId, k: usize) -> Result<f64> {
        self.graph.check_node(v)?;
        effective_k(k, self.graph.num_nodes())?;
        let original = self.base_knn(v, k)?;
        self.importance_against(&original, edges)
    }

    pub fn score(&self, expl: &Explanation, k: usize) -> Result<f64> {
        self.importance(&expl.edge_vec(), expl.target, k)
    }
}
