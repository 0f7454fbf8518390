//! Comparison explainers and the search-variant ablation matrix.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, Graph, NodeId};
use crate::importance::Scorer;
use crate::knn::knn;
use crate::linalg::Matrix;
use crate::mcts::{explain, ActionKind, Expansion, ExplainerConfig, ProximityMode, QUpdate};

/// Target plus one random neighbor.
pub fn onehop_2n(g: &Graph, v: NodeId, rng: &mut impl Rng) -> Result<Explanation> {
    g.check_node(v)?;
    let adj = g.adjacency(v);
    if adj.is_empty() {
        return Ok(Explanation::empty(v));
    }
    let u = adj[rng.random_range(0..adj.len())].0;
    Ok(Explanation::from_edges(v, [Edge::new(v, u)]))
}

/// Target plus two random neighbors and every edge among the three.
pub fn onehop_3n(g: &Graph, v: NodeId, rng: &mut impl Rng) -> Result<Explanation> {
    g.check_node(v)?;
    let adj = g.adjacency(v);
    if adj.len() < 2 {
        return onehop_2n(g, v, rng);
    }
    let picked = sample(rng, adj.len(), 2);
    let nodes: BTreeSet<NodeId> = picked.iter().map(|i| adj[i].0).chain([v]).collect();
    let mut expl = Explanation::from_edges(v, g.induced_edges(&nodes));
    expl.nodes = nodes;
    Ok(expl)
}

/// Target plus its top-`k` embedding neighbors, with the input-graph edges
/// among them (possibly none).
pub fn knn_graph(g: &Graph, emb: &Matrix, v: NodeId, k: usize) -> Result<Explanation> {
    g.check_node(v)?;
    let near = knn(emb, v, k)?;
    let nodes: BTreeSet<NodeId> = near.neighbors.iter().copied().chain([v]).collect();
    let mut expl = Explanation::from_edges(v, g.induced_edges(&nodes));
    expl.nodes = nodes;
    Ok(expl)
}

/// Random walk from `v` collecting traversed edges until `target_size`
/// distinct edges are held or `100 * target_size` steps have been taken.
/// Before each step the walk returns to `v` with probability `p_restart`.
pub fn rw_subgraph(
    g: &Graph,
    v: NodeId,
    target_size: usize,
    rng: &mut impl Rng,
    p_restart: f64,
) -> Result<Explanation> {
    g.check_node(v)?;
    if !(0.0..=1.0).contains(&p_restart) {
        return Err(Error::InvalidConfig(
            "random-walk p_restart must lie in [0, 1]".into(),
        ));
    }
    let mut edges = BTreeSet::new();
    if g.degree(v) == 0 {
        return Ok(Explanation::empty(v));
    }
    let budget = 100 * target_size.max(1);
    let mut cur = v;
    for _ in 0..budget {
        if edges.len() >= target_size {
            break;
        }
        if p_restart > 0.0 && rng.random::<f64>() < p_restart {
            cur = v;
        }
        let adj = g.adjacency(cur);
        let next = adj[rng.random_range(0..adj.len())].0;
        edges.insert(Edge::new(cur, next));
        cur = next;
    }
    Ok(Explanation::from_edges(v, edges))
}

/// Rows of the search ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Adding, all children, no restart, mean Q.
    Mcts,
    /// Removing, all children, mean Q.
    SubgraphX1,
    /// Removing, sampled children, mean Q.
    SubgraphX2,
    /// Adding, sampled children, no restart, mean Q.
    MctsAvg,
    MctsPrx1,
    MctsPrx2,
    MctsPrx3,
    /// Adding, sampled children, no restart, max Q.
    UnrNoRestart,
    /// Adding, sampled children, restart, max Q.
    Unr,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Mcts,
        Variant::SubgraphX1,
        Variant::SubgraphX2,
        Variant::MctsAvg,
        Variant::MctsPrx1,
        Variant::MctsPrx2,
        Variant::MctsPrx3,
        Variant::UnrNoRestart,
        Variant::Unr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mcts => "mcts",
            Variant::SubgraphX1 => "subgraphx-1",
            Variant::SubgraphX2 => "subgraphx-2",
            Variant::MctsAvg => "mcts-avg",
            Variant::MctsPrx1 => "mcts-prx1",
            Variant::MctsPrx2 => "mcts-prx2",
            Variant::MctsPrx3 => "mcts-prx3",
            Variant::UnrNoRestart => "unr-no-restart",
            Variant::Unr => "unr",
        }
    }

    /// `base` with this variant's switches applied. `base.p_restart` is kept
    /// for the restart variant and zeroed for every other row.
    pub fn config(self, base: &ExplainerConfig) -> ExplainerConfig {
        let mut c = base.clone();
        let restart = base.p_restart;
        c.p_restart = 0.0;
        c.proximity = ProximityMode::Constant;
        c.action = ActionKind::Adding;
        c.expansion = Expansion::Sample;
        c.q_update = QUpdate::Max;
        match self {
            Variant::Mcts => {
                c.expansion = Expansion::All;
                c.q_update = QUpdate::Avg;
            }
            Variant::SubgraphX1 => {
                c.action = ActionKind::Removing;
                c.expansion = Expansion::All;
                c.q_update = QUpdate::Avg;
            }
            Variant::SubgraphX2 => {
                c.action = ActionKind::Removing;
                c.q_update = QUpdate::Avg;
            }
            Variant::MctsAvg => c.q_update = QUpdate::Avg,
            Variant::MctsPrx1 => c.proximity = ProximityMode::Degree,
            Variant::MctsPrx2 => c.proximity = ProximityMode::CommonNeighbors,
            Variant::MctsPrx3 => c.proximity = ProximityMode::FeatureCosine,
            Variant::UnrNoRestart => {}
            Variant::Unr => c.p_restart = restart,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown variant `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Runs one ablation row for target `v`.
pub fn ablation_variant(
    variant: Variant,
    scorer: &Scorer,
    v: NodeId,
    base: &ExplainerConfig,
) -> Result<Explanation> {
    Ok(explain(scorer, v, &variant.config(base))?.explanation)
}

/// Every explainer the pipelines can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Unr,
    UnrNoRestart,
    Onehop2n,
    Onehop3n,
    KnnGraph,
    RwG,
    RwGRestart,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Onehop2n,
        Method::Onehop3n,
        Method::KnnGraph,
        Method::RwG,
        Method::RwGRestart,
        Method::UnrNoRestart,
        Method::Unr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Unr => "unr",
            Method::UnrNoRestart => "unr-no-restart",
            Method::Onehop2n => "1hop-2n",
            Method::Onehop3n => "1hop-3n",
            Method::KnnGraph => "knn-graph",
            Method::RwG => "rw-g",
            Method::RwGRestart => "rw-g-restart",
        }
    }

    /// Random-walk baselines match their size to a reference explanation.
    pub fn needs_reference_size(self) -> bool {
        matches!(self, Method::RwG | Method::RwGRestart)
    }

    /// Runs the method for `v`, scoring the result. `reference_size` is the
    /// walk length target for the random-walk methods.
    pub fn run(
        self,
        scorer: &Scorer,
        v: NodeId,
        cfg: &ExplainerConfig,
        reference_size: Option<usize>,
    ) -> Result<Explanation> {
        let g = scorer.graph();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.target_seed(v) ^ 0x5851_F42D_4C95_7F2D);
        let expl = match self {
            Method::Unr => return ablation_variant(Variant::Unr, scorer, v, cfg),
            Method::UnrNoRestart => return ablation_variant(Variant::UnrNoRestart, scorer, v, cfg),
            Method::Onehop2n => onehop_2n(g, v, &mut rng)?,
            Method::Onehop3n => onehop_3n(g, v, &mut rng)?,
            Method::KnnGraph => knn_graph(g, scorer.embedding(), v, 5)?,
            Method::RwG | Method::RwGRestart => {
                let size = reference_size.ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "{} needs a reference explanation size",
                        self.name()
                    ))
                })?;
                let p = if self == Method::RwGRestart {
                    cfg.p_restart
                } else {
                    0.0
                };
                rw_subgraph(g, v, size, &mut rng, p)?
            }
        };
        let imp = scorer.score(&expl, cfg.k)?;
        Ok(expl.with_importance(imp))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown method `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}
