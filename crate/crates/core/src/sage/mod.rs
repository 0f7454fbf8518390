//! GraphSAGE mean-aggregator encoder.
//!
//! Layers are stored in row form: `h_v = act(x_v * M_self + mean(x_u) * M_agg)`
//! with both matrices `d_in x d_out`.

mod persist;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Explanation, Graph, NodeId, PerturbMode, Topology};
use crate::io;
use crate::linalg::{axpy, euclidean, Matrix};

pub use persist::{load_model, save_model};
pub use train::{
    contrastive_loss, contrastive_loss_and_grad, init_model, sample_pairs, train_unsupervised,
    Gradients, TrainConfig, TrainPair,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Relu | Activation::Tanh => 1.0,
            Activation::Sigmoid => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Anything that can hand out embedding rows by node id.
pub trait Rows {
    fn row(&self, i: usize) -> &[f64];
}

impl Rows for Matrix {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        Matrix::row(self, i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SageLayer {
    pub m_self: Matrix,
    pub m_agg: Matrix,
}

impl SageLayer {
    pub fn new(m_self: Matrix, m_agg: Matrix) -> Result<Self> {
        if m_self.rows() != m_agg.rows() || m_self.cols() != m_agg.cols() {
            return Err(Error::DimensionMismatch {
                context: "M_self vs M_agg shape".into(),
                expected: m_self.rows() * m_self.cols(),
                found: m_agg.rows() * m_agg.cols(),
            });
        }
        Ok(Self { m_self, m_agg })
    }

    pub fn in_dim(&self) -> usize {
        self.m_self.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.m_self.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SageModel {
    layers: Vec<SageLayer>,
    activation: Activation,
    /// Weight the neighbor mean by edge weight instead of a uniform mean.
    weighted_mean: bool,
}

impl SageModel {
    pub fn new(layers: Vec<SageLayer>, activation: Activation) -> Result<Self> {
        let model = Self {
            layers,
            activation,
            weighted_mean: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_weighted_mean(mut self, on: bool) -> Self {
        self.weighted_mean = on;
        self
    }

    pub fn layers(&self) -> &[SageLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [SageLayer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.activation.lipschitz()
    }

    pub fn weighted_mean(&self) -> bool {
        self.weighted_mean
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, SageLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, SageLayer::out_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("model has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: format!("layer {i} output vs layer {} input", i + 1),
                    expected: pair[0].out_dim(),
                    found: pair[1].in_dim(),
                });
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !l.m_self.is_finite() || !l.m_agg.is_finite() {
                return Err(Error::NonFiniteWeights { layer: i });
            }
        }
        Ok(())
    }

    fn check_input(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "feature dim vs layer-0 input dim".into(),
                expected: self.in_dim(),
                found: features.cols(),
            });
        }
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.activation.name().as_bytes());
        h.update([self.weighted_mean as u8]);
        for l in &self.layers {
            l.m_self.hash_into(&mut h);
            l.m_agg.hash_into(&mut h);
        }
        hex::encode(h.finalize())
    }

    /// Mean (or weight-normalized) neighbor aggregate of `input` at `v`; zero
    /// for isolated nodes.
    #[inline]
    pub fn aggregate<R: Rows + ?Sized, T: Topology>(
        &self,
        input: &R,
        topo: &T,
        v: NodeId,
        out: &mut [f64],
    ) {
        out.fill(0.0);
        let mut total = 0.0;
        let weighted = self.weighted_mean;
        topo.for_each_neighbor(v, |u, w| {
            let s = if weighted { w } else { 1.0 };
            axpy(out, s, input.row(u));
            total += s;
        });
        if total > 0.0 {
            for x in out.iter_mut() {
                *x /= total;
            }
        }
    }

    /// Pre-activation `x * M_self + agg * M_agg` into `out`.
    #[inline]
    pub(crate) fn pre_activation(layer: &SageLayer, x: &[f64], agg: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (k, &a) in x.iter().enumerate() {
            if a != 0.0 {
                axpy(out, a, layer.m_self.row(k));
            }
        }
        for (k, &a) in agg.iter().enumerate() {
            if a != 0.0 {
                axpy(out, a, layer.m_agg.row(k));
            }
        }
    }

    /// One output row of layer `l`. Every forward path goes through here so
    /// full and incremental passes agree bitwise.
    #[inline]
    pub fn layer_row<R: Rows + ?Sized, T: Topology>(
        &self,
        l: usize,
        input: &R,
        topo: &T,
        v: NodeId,
        agg: &mut [f64],
        out: &mut [f64],
    ) {
        let layer = &self.layers[l];
        self.aggregate(input, topo, v, agg);
        Self::pre_activation(layer, input.row(v), agg, out);
        for z in out.iter_mut() {
            *z = self.activation.apply(*z);
        }
    }

    /// Outputs of every layer over `topo`; the last entry is the embedding.
    pub fn forward_layers<T: Topology>(&self, topo: &T, features: &Matrix) -> Result<Vec<Matrix>> {
        self.validate()?;
        self.check_input(features)?;
        let n = topo.num_nodes();
        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows vs node count".into(),
                expected: n,
                found: features.rows(),
            });
        }
        let mut outs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { features } else { &outs[l - 1] };
            let mut out = Matrix::zeros(n, layer.out_dim());
            let mut agg = vec![0.0; layer.in_dim()];
            for v in 0..n {
                self.layer_row(l, input, topo, v, &mut agg, out.row_mut(v));
            }
            outs.push(out);
        }
        Ok(outs)
    }

    pub fn forward(&self, g: &Graph) -> Result<Embedding> {
        let mut layers = self.forward_layers(g, g.features())?;
        let matrix = layers.pop().expect("validated model has layers");
        Ok(Embedding {
            matrix,
            model_hash: self.content_hash(),
            graph_hash: g.content_hash(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub matrix: Matrix,
    pub model_hash: String,
    pub graph_hash: String,
}

impl Embedding {
    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, v: NodeId) -> &[f64] {
        self.matrix.row(v)
    }
}

impl Rows for Embedding {
    fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

/// Wraps an externally produced `N x d` embedding CSV. Such embeddings can be
/// searched and evaluated but not re-computed under perturbation.
pub fn load_external_embedding(path: &Path, g: &Graph) -> Result<Embedding> {
    let text = io::read_to_string(path)?;
    let matrix = io::parse_matrix_csv(path, &text)?;
    if matrix.rows() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: format!("{} rows vs graph nodes", path.display()),
            expected: g.num_nodes(),
            found: matrix.rows(),
        });
    }
    if !matrix.is_finite() {
        return Err(Error::parse(
            path,
            0,
            "embedding contains non-finite values",
        ));
    }
    Ok(Embedding {
        matrix,
        model_hash: format!("external:{}", hex::encode(Sha256::digest(text.as_bytes()))),
        graph_hash: g.content_hash(),
    })
}

/// `C_Lp * ||M_agg||_2 * ||delta_v - delta_u||_2`, where `delta_w` is the change
/// in `w`'s mean neighbor feature vector caused by removing the explanation.
pub fn one_layer_distance_bound(
    model: &SageModel,
    g: &Graph,
    expl: &Explanation,
    v: NodeId,
    u: NodeId,
) -> Result<f64> {
    if model.layers().len() != 1 {
        return Err(Error::Unsupported(format!(
            "the distance bound holds for one-layer models only (got {} layers)",
            model.layers().len()
        )));
    }
    g.check_node(v)?;
    g.check_node(u)?;
    model.check_input(g.features())?;
    let edges = expl.edge_vec();
    let view = g.view(&edges, PerturbMode::Remove)?;
    let x = g.features();
    let d = x.cols();
    let delta = |w: NodeId| {
        let mut before = vec![0.0; d];
        let mut after = vec![0.0; d];
        model.aggregate(x, g, w, &mut before);
        model.aggregate(x, &view, w, &mut after);
        before
            .iter()
            .zip(&after)
            .map(|(b, a)| b - a)
            .collect::<Vec<f64>>()
    };
    let (dv, du) = (delta(v), delta(u));
    let spread = euclidean(&dv, &du);
    if spread == 0.0 {
        return Ok(0.0);
    }
    Ok(model.lipschitz_constant() * model.layers()[0].m_agg.spectral_norm() * spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::house;
    use crate::graph::Edge;

    fn one_layer(s: Vec<Vec<f64>>, a: Vec<Vec<f64>>, act: Activation) -> SageModel {
        let layer = SageLayer::new(
            Matrix::from_rows(&s).unwrap(),
            Matrix::from_rows(&a).unwrap(),
        )
        .unwrap();
        SageModel::new(vec![layer], act).unwrap()
    }

    #[test]
    fn isolated_node_uses_zero_aggregate() {
        let x = Matrix::from_rows(&[vec![-1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let g = Graph::unweighted(2, &[], x).unwrap();
        let m = one_layer(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            Activation::Relu,
        );
        let e = m.forward(&g).unwrap();
        assert_eq!(e.row(0), &[0.0, 2.0]);
        assert_eq!(e.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let m = one_layer(
            vec![vec![0.0; 2]; 2],
            vec![vec![0.0; 2]; 2],
            Activation::Relu,
        );
        let e = m.forward(&house()).unwrap();
        assert!(e.matrix.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn path_by_hand() {
        // path 0-1-2, x0=(1,0) x1=(0,1) x2=(1,1)
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = Graph::unweighted(3, &[(0, 1), (1, 2)], x).unwrap();
        // M_self = [[1,2],[0,1]], M_agg = [[1,0],[-1,1]]
        let m = one_layer(
            vec![vec![1.0, 2.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![-1.0, 1.0]],
            Activation::Relu,
        );
        let e = m.forward(&g).unwrap();
        // node 0: x=(1,0) -> (1,2); mean=(0,1) -> (-1,1); sum (0,3)
        assert_eq!(e.row(0), &[0.0, 3.0]);
        // node 1: x=(0,1) -> (0,1); mean=(1,0.5) -> (0.5,0.5); sum (0.5,1.5)
        assert_eq!(e.row(1), &[0.5, 1.5]);
        // node 2: x=(1,1) -> (1,3); mean=(0,1) -> (-1,1); sum (0,4)
        assert_eq!(e.row(2), &[0.0, 4.0]);
    }

    #[test]
    fn weighted_mean_flag() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let g = Graph::new(3, [(0, 1, 1.0), (0, 2, 0.5)], x).unwrap();
        let m = one_layer(vec![vec![0.0]], vec![vec![1.0]], Activation::Relu);
        assert_eq!(m.forward(&g).unwrap().row(0), &[2.0]);
        let w = m.with_weighted_mean(true);
        // (1*1 + 0.5*3) / 1.5
        assert!((w.forward(&g).unwrap().row(0)[0] - 2.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_and_finiteness_checks() {
        let m = one_layer(vec![vec![1.0]; 3], vec![vec![1.0]; 3], Activation::Tanh);
        assert!(matches!(
            m.forward(&house()),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = SageLayer::new(Matrix::filled(2, 2, f64::NAN), Matrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            SageModel::new(vec![bad], Activation::Relu),
            Err(Error::NonFiniteWeights { layer: 0 })
        ));
        let l0 = SageLayer::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3)).unwrap();
        let l1 = SageLayer::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3)).unwrap();
        assert!(SageModel::new(vec![l0, l1], Activation::Relu).is_err());
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(Activation::Relu.lipschitz(), 1.0);
        assert_eq!(Activation::Tanh.lipschitz(), 1.0);
        assert_eq!(Activation::Sigmoid.lipschitz(), 0.25);
    }

    #[test]
    fn bound_is_zero_for_empty_or_distant_explanations() {
        let m = one_layer(
            vec![vec![1.0, 2.0], vec![0.5, 1.0]],
            vec![vec![1.0, 0.0], vec![-1.0, 1.0]],
            Activation::Sigmoid,
        );
        let g = house();
        assert_eq!(
            one_layer_distance_bound(&m, &g, &Explanation::empty(0), 0, 2).unwrap(),
            0.0
        );
        // path 0-1-2-3-4-5: removing (4,5) changes neither 0's nor 1's neighborhood
        let path = Graph::unweighted(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
            Matrix::from_rows(&(0..6).map(|i| vec![i as f64, 1.0]).collect::<Vec<_>>()).unwrap(),
        )
        .unwrap();
        let far = Explanation::from_edges(4, [Edge::new(4, 5)]);
        assert_eq!(
            one_layer_distance_bound(&m, &path, &far, 0, 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn bound_rejects_deep_models() {
        let l = || SageLayer::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        let m = SageModel::new(vec![l(), l()], Activation::Relu).unwrap();
        assert!(matches!(
            one_layer_distance_bound(&m, &house(), &Explanation::empty(0), 0, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn external_embedding_rows_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        std::fs::write(&p, "a,b\n1,2\n3,4\n5,6\n7,8\n9,10\n").unwrap();
        let e = load_external_embedding(&p, &house()).unwrap();
        assert_eq!(e.row(4), &[9.0, 10.0]);
        std::fs::write(&p, "1,2\n").unwrap();
        assert!(load_external_embedding(&p, &house()).is_err());
    }
}
