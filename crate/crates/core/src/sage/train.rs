//! Unsupervised contrastive training: random-walk co-occurrence positives,
//! uniform negatives, logistic loss on dot products, full-batch Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Activation, SageLayer, SageModel};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::linalg::{axpy, dot, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub weighted_mean: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Training pairs (positive and negative) per optimizer step.
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Dropout rate on hidden layer outputs during training.
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 64,
            activation: Activation::Relu,
            weighted_mean: false,
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 256,
            negatives_per_positive: 1,
            walk_length: 2,
            walks_per_node: 1,
            dropout: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_layers", self.num_layers),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("walk_length", self.walk_length),
            ("walks_per_node", self.walks_per_node),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig(format!(
                    "train.{name} must be positive"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(
                "train.dropout must lie in [0, 1)".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "train.learning_rate must be a positive number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainPair {
    pub a: NodeId,
    pub b: NodeId,
    pub positive: bool,
}

/// Glorot-uniform initialization.
pub fn init_model(in_dim: usize, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<SageModel> {
    let mut layers = Vec::with_capacity(cfg.num_layers);
    let mut d_in = in_dim;
    for _ in 0..cfg.num_layers {
        let d_out = cfg.hidden_dim;
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let mut draw = || {
            let data = (0..d_in * d_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            Matrix::from_vec(d_in, d_out, data)
        };
        let m_self = draw()?;
        let m_agg = draw()?;
        layers.push(SageLayer::new(m_self, m_agg)?);
        d_in = d_out;
    }
    Ok(SageModel::new(layers, cfg.activation)?.with_weighted_mean(cfg.weighted_mean))
}

/// One epoch of training pairs: walk co-occurrences as positives, uniform
/// random nodes as negatives, shuffled.
pub fn sample_pairs(g: &Graph, cfg: &TrainConfig, rng: &mut impl Rng) -> Vec<TrainPair> {
    let n = g.num_nodes();
    let mut pairs = Vec::new();
    for v in 0..n {
        for _ in 0..cfg.walks_per_node {
            let mut cur = v;
            for _ in 0..cfg.walk_length {
                let adj = g.adjacency(cur);
                if adj.is_empty() {
                    break;
                }
                cur = adj[rng.random_range(0..adj.len())].0;
                if cur == v {
                    continue;
                }
                pairs.push(TrainPair {
                    a: v,
                    b: cur,
                    positive: true,
                });
                if n > 1 {
                    for _ in 0..cfg.negatives_per_positive {
                        let mut w = rng.random_range(0..n - 1);
                        if w >= v {
                            w += 1;
                        }
                        pairs.push(TrainPair {
                            a: v,
                            b: w,
                            positive: false,
                        });
                    }
                }
            }
        }
    }
    pairs.shuffle(rng);
    pairs
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// `(dL/dM_self, dL/dM_agg)` per layer.
    pub layers: Vec<(Matrix, Matrix)>,
}

struct LayerCache {
    agg: Matrix,
    pre: Matrix,
    out: Matrix,
}

/// Layer outputs with the activations kept for backprop. `masks` holds one
/// elementwise scale per hidden layer (every layer but the last).
fn forward_cached(model: &SageModel, g: &Graph, masks: &[Matrix]) -> Result<Vec<LayerCache>> {
    model.validate()?;
    model.check_input(g.features())?;
    let n = g.num_nodes();
    let mut caches: Vec<LayerCache> = Vec::with_capacity(model.layers().len());
    for (l, layer) in model.layers().iter().enumerate() {
        let input = if l == 0 {
            g.features()
        } else {
            &caches[l - 1].out
        };
        let mut agg = Matrix::zeros(n, layer.in_dim());
        let mut pre = Matrix::zeros(n, layer.out_dim());
        for v in 0..n {
            model.aggregate(input, g, v, agg.row_mut(v));
            SageModel::pre_activation(layer, input.row(v), agg.row(v), pre.row_mut(v));
        }
        let mut out = pre.clone();
        for z in out.as_mut_slice() {
            *z = model.activation().apply(*z);
        }
        if let Some(mask) = masks.get(l) {
            for (z, m) in out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *z *= m;
            }
        }
        caches.push(LayerCache { agg, pre, out });
    }
    Ok(caches)
}

/// `softplus(x) = ln(1 + e^x)`, stable for large |x|.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn pair_terms<'a>(
    emb: &'a Matrix,
    pairs: &'a [TrainPair],
) -> impl Iterator<Item = (TrainPair, f64, f64)> + 'a {
    pairs.iter().map(move |&p| {
        let y = if p.positive { 1.0 } else { -1.0 };
        let s = dot(emb.row(p.a), emb.row(p.b));
        (p, y, s)
    })
}

/// Mean of `-ln sigmoid(+-z_a . z_b)` over `pairs`.
pub fn contrastive_loss(model: &SageModel, g: &Graph, pairs: &[TrainPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let caches = forward_cached(model, g, &[])?;
    let emb = &caches.last().expect("non-empty").out;
    let total: f64 = pair_terms(emb, pairs)
        .map(|(_, y, s)| softplus(-y * s))
        .sum();
    Ok(total / pairs.len() as f64)
}

pub fn contrastive_loss_and_grad(
    model: &SageModel,
    g: &Graph,
    pairs: &[TrainPair],
) -> Result<(f64, Gradients)> {
    loss_and_grad_masked(model, g, pairs, &[])
}

fn dropout_masks(model: &SageModel, n: usize, rate: f64, rng: &mut impl Rng) -> Vec<Matrix> {
    if rate == 0.0 {
        return Vec::new();
    }
    let keep = 1.0 / (1.0 - rate);
    let hidden = &model.layers()[..model.layers().len() - 1];
    hidden
        .iter()
        .map(|layer| {
            let data = (0..n * layer.out_dim())
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect();
            Matrix::from_vec(n, layer.out_dim(), data).expect("sized to fit")
        })
        .collect()
}

fn loss_and_grad_masked(
    model: &SageModel,
    g: &Graph,
    pairs: &[TrainPair],
    masks: &[Matrix],
) -> Result<(f64, Gradients)> {
    let caches = forward_cached(model, g, masks)?;
    let n = g.num_nodes();
    let emb = &caches.last().expect("non-empty").out;
    let mut d_h = Matrix::zeros(n, model.out_dim());
    let mut loss = 0.0;
    let scale = 1.0 / pairs.len().max(1) as f64;
    for (p, y, s) in pair_terms(emb, pairs) {
        loss += softplus(-y * s);
        let coef = -y * sigmoid(-y * s) * scale;
        axpy(d_h.row_mut(p.a), coef, emb.row(p.b));
        axpy(d_h.row_mut(p.b), coef, emb.row(p.a));
    }
    loss *= scale;

    let inv_total: Vec<f64> = (0..n)
        .map(|v| {
            let total: f64 = g
                .adjacency(v)
                .iter()
                .map(|&(_, w)| if model.weighted_mean() { w } else { 1.0 })
                .sum();
            if total > 0.0 {
                1.0 / total
            } else {
                0.0
            }
        })
        .collect();

    let mut grads = Vec::with_capacity(model.layers().len());
    for l in (0..model.layers().len()).rev() {
        let layer = &model.layers()[l];
        let cache = &caches[l];
        let input = if l == 0 {
            g.features()
        } else {
            &caches[l - 1].out
        };
        let mut d_z = d_h;
        for (dz, &z) in d_z.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            *dz *= model.activation().derivative(z);
        }
        if let Some(mask) = masks.get(l) {
            for (dz, m) in d_z.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *dz *= m;
            }
        }
        let mut d_self = Matrix::zeros(layer.in_dim(), layer.out_dim());
        let mut d_agg = Matrix::zeros(layer.in_dim(), layer.out_dim());
        for v in 0..n {
            let dz = d_z.row(v);
            for (k, &x) in input.row(v).iter().enumerate() {
                if x != 0.0 {
                    axpy(d_self.row_mut(k), x, dz);
                }
            }
            for (k, &a) in cache.agg.row(v).iter().enumerate() {
                if a != 0.0 {
                    axpy(d_agg.row_mut(k), a, dz);
                }
            }
        }
        grads.push((d_self, d_agg));
        if l == 0 {
            break;
        }
        // d_in = dZ M_self^T + A^T (dZ M_agg^T)
        let mut d_in = Matrix::zeros(n, layer.in_dim());
        let mut through_agg = Matrix::zeros(n, layer.in_dim());
        for v in 0..n {
            let dz = d_z.row(v);
            for k in 0..layer.in_dim() {
                d_in.row_mut(v)[k] = dot(dz, layer.m_self.row(k));
                through_agg.row_mut(v)[k] = dot(dz, layer.m_agg.row(k));
            }
        }
        for v in 0..n {
            for &(u, w) in g.adjacency(v) {
                let a = if model.weighted_mean() { w } else { 1.0 } * inv_total[v];
                let (src, dst) = (through_agg.row(v).to_vec(), d_in.row_mut(u));
                axpy(dst, a, &src);
            }
        }
        d_h = d_in;
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &SageModel, lr: f64) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .iter()
            .flat_map(|l| [l.m_self.as_slice().len(), l.m_agg.as_slice().len()])
            .collect();
        Self {
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut SageModel, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let params = model
            .layers_mut()
            .iter_mut()
            .flat_map(|l| [&mut l.m_self, &mut l.m_agg]);
        let gs = grads.layers.iter().flat_map(|(a, b)| [a, b]);
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v)
            {
                *mi = Self::B1 * *mi + (1.0 - Self::B1) * gi;
                *vi = Self::B2 * *vi + (1.0 - Self::B2) * gi * gi;
                *w -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + Self::EPS);
            }
        }
    }
}

pub fn train_unsupervised(g: &Graph, cfg: &TrainConfig, seed: u64) -> Result<SageModel> {
    cfg.validate()?;
    if g.num_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = init_model(g.feature_dim(), cfg, &mut rng)?;
    let mut adam = Adam::new(&model, cfg.learning_rate);
    for epoch in 0..cfg.epochs {
        let pairs = sample_pairs(g, cfg, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in pairs.chunks(cfg.batch_size) {
            let masks = dropout_masks(&model, g.num_nodes(), cfg.dropout, &mut rng);
            let (loss, grads) = loss_and_grad_masked(&model, g, batch, &masks)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads);
        }
        if let Err(Error::NonFiniteWeights { .. }) = model.validate() {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        log::debug!(
            "epoch {epoch}: loss {:.5}",
            epoch_loss / pairs.len().max(1) as f64
        );
    }
    Ok(model)
}
