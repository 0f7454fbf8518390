//! Monte Carlo tree search over subgraph-growing walks from the target.
//!
//! Each tree node stands on a graph node; an action moves to a graph
//! neighbor and the trajectory's steps become the candidate explanation's
//! edges. Rewards are importances. With probability `p_restart` a selection
//! step jumps back to the root and takes a random non-greedy root action,
//! which keeps the explanation dense around the target.

mod prune;
mod tree;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, NodeId};
use crate::importance::Scorer;

pub use tree::{convert, ucb, Action, EdgeStats, SearchTree, Step, Trajectory, TreeNode};

/// Prior `P` in the exploration term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityMode {
    #[default]
    Constant,
    /// Degree of the child's graph node.
    Degree,
    /// Neighbors the child's graph node shares with the target.
    CommonNeighbors,
    /// Cosine similarity of the child's features to the target's.
    FeatureCosine,
}

/// How `Q` summarizes an action's rewards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QUpdate {
    #[default]
    Max,
    Avg,
}

/// Whether actions grow a walk from the target or prune its 2-hop neighborhood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    #[default]
    Adding,
    Removing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    /// At most the expansion cap of children per expansion.
    #[default]
    Sample,
    /// Every neighbor becomes a child.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    /// Neighbors compared by the importance reward.
    pub k: usize,
    /// Exploration weight.
    pub lambda: f64,
    pub p_restart: f64,
    /// Iteration budget `T`.
    pub max_iters: usize,
    /// Children per expansion; `None` uses the rounded average degree.
    pub expansion_cap: Option<usize>,
    /// Never expand more than three children at once.
    pub hard_cap: bool,
    pub expansion: Expansion,
    /// Upper bound on graph nodes in a candidate explanation.
    pub max_subgraph_nodes: usize,
    pub proximity: ProximityMode,
    pub q_update: QUpdate,
    pub action: ActionKind,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            k: 5,
            lambda: 1.0,
            p_restart: 0.2,
            max_iters: 1000,
            expansion_cap: None,
            hard_cap: false,
            expansion: Expansion::Sample,
            max_subgraph_nodes: 20,
            proximity: ProximityMode::Constant,
            q_update: QUpdate::Max,
            action: ActionKind::Adding,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("explainer.k must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_restart) {
            return bad("explainer.p_restart must lie in [0, 1]");
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return bad("explainer.lambda must be a non-negative number");
        }
        if self.max_iters == 0 {
            return bad("explainer.max_iters must be positive");
        }
        if self.max_subgraph_nodes < 2 {
            return bad("explainer.max_subgraph_nodes must be at least 2");
        }
        if self.expansion_cap == Some(0) {
            return bad("explainer.expansion_cap must be positive");
        }
        Ok(())
    }

    /// Children per expansion on a graph with the given average degree;
    /// `None` means unlimited.
    pub fn cap_for(&self, avg_degree: f64) -> Option<usize> {
        if self.expansion == Expansion::All {
            return None;
        }
        let base = self
            .expansion_cap
            .unwrap_or_else(|| (avg_degree.round() as usize).max(1));
        Some(if self.hard_cap { base.min(3) } else { base })
    }

    /// Per-target RNG seed.
    pub fn target_seed(&self, v: NodeId) -> u64 {
        self.seed ^ (v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    /// Best candidate, importance set.
    pub explanation: Explanation,
    pub iterations: usize,
    /// Distinct candidate edge sets evaluated.
    pub candidates: usize,
    /// The target has no edges, so nothing can be removed.
    pub inexplicable: bool,
}

impl ExplainReport {
    pub fn importance(&self) -> f64 {
        self.explanation.importance.unwrap_or(0.0)
    }

    fn inexplicable(target: NodeId) -> Self {
        Self {
            explanation: Explanation::empty(target).with_importance(0.0),
            iterations: 0,
            candidates: 0,
            inexplicable: true,
        }
    }
}

/// Candidate pool: first importance per distinct edge set, in discovery order.
#[derive(Default)]
struct Candidates {
    seen: HashMap<Vec<Edge>, f64>,
    order: Vec<(Vec<Edge>, f64)>,
}

impl Candidates {
    fn score(
        &mut self,
        edges: Vec<Edge>,
        eval: impl FnOnce(&[Edge]) -> Result<f64>,
    ) -> Result<f64> {
        if let Some(&r) = self.seen.get(&edges) {
            return Ok(r);
        }
        let r = eval(&edges)?;
        self.seen.insert(edges.clone(), r);
        self.order.push((edges, r));
        Ok(r)
    }

    /// Highest importance, then fewest edges, then earliest.
    fn best(&self) -> Option<&(Vec<Edge>, f64)> {
        let mut best: Option<&(Vec<Edge>, f64)> = None;
        for c in &self.order {
            best = match best {
                Some(b) if c.1 < b.1 || (c.1 == b.1 && c.0.len() >= b.0.len()) => Some(b),
                _ => Some(c),
            };
        }
        best
    }
}

/// Searches for the explanation of `v` under `cfg`.
pub fn explain(scorer: &Scorer, v: NodeId, cfg: &ExplainerConfig) -> Result<ExplainReport> {
    cfg.validate()?;
    let g = scorer.graph();
    g.check_node(v)?;
    if g.degree(v) == 0 {
        return Ok(ExplainReport::inexplicable(v));
    }
    if cfg.action == ActionKind::Removing {
        return prune::explain_by_pruning(scorer, v, cfg);
    }
    let original = scorer.base_knn(v, cfg.k)?;
    let cap = cfg.cap_for(g.avg_degree()?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.target_seed(v));
    let mut tree = SearchTree::new(v);
    let mut pool = Candidates::default();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        if tree.nodes[tree.root].actions.is_empty() {
            tree.nodes[tree.root].arrivals += 1;
            tree.expand(tree.root, g, cap, cfg.proximity, &mut rng);
        }
        let traj = tree.select(g, cfg, cap, &mut rng);
        let expl = convert(&traj, g, v)?;
        let reward = pool.score(expl.edge_vec(), |e| scorer.importance_against(&original, e))?;
        tree.backpropagate(&traj, reward, cfg.q_update);
        if reward >= 1.0 {
            break;
        }
    }
    let (edges, imp) = pool.best().cloned().expect("at least one iteration ran");
    Ok(ExplainReport {
        explanation: Explanation::from_edges(v, edges).with_importance(imp),
        iterations,
        candidates: pool.order.len(),
        inexplicable: false,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::Graph;
    use crate::linalg::Matrix;
    use crate::sage::{init_model, TrainConfig};

    fn two_triangles() -> Scorer {
        let x = Matrix::from_rows(
            &(0..12)
                .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.61).cos(), 1.0])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let g = Graph::unweighted(
            12,
            &[
                (0, 1),
                (1, 2),
                (0, 2),
                (3, 4),
                (4, 5),
                (3, 5),
                (2, 3),
                (5, 6),
                (6, 7),
                (7, 8),
                (8, 9),
                (9, 10),
                (10, 11),
            ],
            x,
        )
        .unwrap();
        let cfg = TrainConfig {
            hidden_dim: 6,
            ..Default::default()
        };
        let m = init_model(3, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        Scorer::new(Arc::new(m), Arc::new(g)).unwrap()
    }

    #[test]
    fn isolated_target_is_inexplicable() {
        let g = Graph::unweighted(3, &[(0, 1)], Matrix::filled(3, 2, 1.0)).unwrap();
        let cfg = TrainConfig {
            hidden_dim: 2,
            ..Default::default()
        };
        let m = init_model(2, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = Scorer::new(Arc::new(m), Arc::new(g)).unwrap();
        let r = explain(&s, 2, &ExplainerConfig::default()).unwrap();
        assert!(r.inexplicable);
        assert!(r.explanation.edges.is_empty());
        assert_eq!(r.importance(), 0.0);
    }

    #[test]
    fn single_iteration_returns_first_candidate() {
        let s = two_triangles();
        let cfg = ExplainerConfig {
            max_iters: 1,
            k: 3,
            ..Default::default()
        };
        let r = explain(&s, 0, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.candidates, 1);
        assert_eq!(r.explanation.size(), 1);
        let want = s.score(&r.explanation, 3).unwrap();
        assert_eq!(r.importance(), want);
    }

    #[test]
    fn explanations_are_valid_and_deterministic() {
        let s = two_triangles();
        for v in 0..12 {
            let cfg = ExplainerConfig {
                k: 3,
                max_iters: 200,
                seed: 5,
                ..Default::default()
            };
            let a = explain(&s, v, &cfg).unwrap();
            let b = explain(&s, v, &cfg).unwrap();
            assert_eq!(a, b);
            a.explanation.validate(s.graph()).unwrap();
            assert!(a.explanation.nodes.len() <= cfg.max_subgraph_nodes);
            assert_eq!(a.importance(), s.score(&a.explanation, 3).unwrap());
        }
    }

    #[test]
    fn cap_rules() {
        let cfg = ExplainerConfig::default();
        assert_eq!(cfg.cap_for(5.87), Some(6));
        assert_eq!(cfg.cap_for(0.2), Some(1));
        let hard = ExplainerConfig {
            hard_cap: true,
            ..Default::default()
        };
        assert_eq!(hard.cap_for(5.87), Some(3));
        let all = ExplainerConfig {
            expansion: Expansion::All,
            ..Default::default()
        };
        assert_eq!(all.cap_for(5.87), None);
    }

    #[test]
    fn candidate_pick_prefers_importance_then_size_then_order() {
        let e = |n: usize| (0..n).map(|i| Edge::new(i, i + 1)).collect::<Vec<_>>();
        let mut pool = Candidates::default();
        for (edges, r) in [
            (e(3), 0.6),
            (e(2), 0.6),
            (e(4), 0.8),
            (vec![Edge::new(7, 8), Edge::new(8, 9)], 0.8),
            (e(2).into_iter().rev().take(1).collect(), 0.8),
        ] {
            pool.score(edges, |_| Ok(r)).unwrap();
        }
        assert_eq!(pool.best().unwrap().0, vec![Edge::new(1, 2)]);
        // duplicates keep the first score
        assert_eq!(pool.score(e(3), |_| Ok(1.0)).unwrap(), 0.6);
    }
}
