//! Node-pruning search: start from the target's 2-hop neighborhood and remove
//! one node per action, keeping the target's connected component, until at
//! most `max_subgraph_nodes` remain. The candidate is the induced subgraph.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{tree::ucb, Candidates, EdgeStats, ExplainReport, ExplainerConfig};
use crate::error::Result;
use crate::graph::{Explanation, Graph, NodeId};
use crate::importance::Scorer;

struct PruneNode {
    /// Remaining graph nodes, sorted; computed on first visit.
    state: Option<Vec<NodeId>>,
    parent: usize,
    removed: NodeId,
    children: Vec<(usize, EdgeStats)>,
}

/// Target's component of the subgraph induced by `nodes` minus `drop`.
fn component_without(g: &Graph, nodes: &[NodeId], drop: NodeId, target: NodeId) -> Vec<NodeId> {
    let keep = |u: NodeId| u != drop && nodes.binary_search(&u).is_ok();
    let mut seen = BTreeSet::from([target]);
    let mut queue = VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        for &(w, _) in g.adjacency(u) {
            if keep(w) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().collect()
}

pub(super) fn explain_by_pruning(
    scorer: &Scorer,
    v: NodeId,
    cfg: &ExplainerConfig,
) -> Result<ExplainReport> {
    let g = scorer.graph();
    let original = scorer.base_knn(v, cfg.k)?;
    let cap = cfg.cap_for(g.avg_degree()?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.target_seed(v));
    let ego: Vec<NodeId> = g.ego(v, 2)?.nodes.into_iter().collect();
    let mut nodes = vec![PruneNode {
        state: Some(ego),
        parent: usize::MAX,
        removed: v,
        children: Vec::new(),
    }];
    let mut pool = Candidates::default();
    let terminal = |s: &[NodeId]| s.len() <= cfg.max_subgraph_nodes;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut cur = 0;
        loop {
            if nodes[cur].state.is_none() {
                let parent = nodes[cur].parent;
                let s = nodes[parent]
                    .state
                    .as_deref()
                    .expect("parent visited first");
                nodes[cur].state = Some(component_without(g, s, nodes[cur].removed, v));
            }
            let state = nodes[cur].state.as_deref().expect("just set");
            if terminal(state) {
                break;
            }
            if nodes[cur].children.is_empty() {
                let removable: Vec<NodeId> = state.iter().copied().filter(|&u| u != v).collect();
                let picked: Vec<NodeId> = match cap {
                    Some(c) if c < removable.len() => {
                        let mut p: Vec<NodeId> = sample(&mut rng, removable.len(), c)
                            .into_iter()
                            .map(|i| removable[i])
                            .collect();
                        p.sort_unstable();
                        p
                    }
                    _ => removable,
                };
                for r in picked {
                    let idx = nodes.len();
                    nodes.push(PruneNode {
                        state: None,
                        parent: cur,
                        removed: r,
                        children: Vec::new(),
                    });
                    nodes[cur].children.push((idx, EdgeStats::default()));
                }
            }
            let root_visits: u32 = nodes[0].children.iter().map(|c| c.1.visits).sum();
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, (_, stats)) in nodes[cur].children.iter().enumerate() {
                let s = ucb(stats, root_visits, cfg.lambda, 1.0);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            path.push((cur, best));
            cur = nodes[cur].children[best].0;
        }

        let state: BTreeSet<NodeId> = nodes[cur]
            .state
            .as_ref()
            .expect("visited")
            .iter()
            .copied()
            .collect();
        let edges: Vec<_> = g.induced_edges(&state).into_iter().collect();
        let reward = pool.score(edges, |e| scorer.importance_against(&original, e))?;
        for &(n, a) in &path {
            nodes[n].children[a].1.record(reward, cfg.q_update);
        }
        if reward >= 1.0 || path.is_empty() {
            break;
        }
    }

    let (edges, imp) = pool.best().cloned().expect("at least one iteration ran");
    let expl = Explanation::from_edges(v, edges).with_importance(imp);
    Ok(ExplainReport {
        explanation: expl,
        iterations,
        candidates: pool.order.len(),
        inexplicable: false,
    })
}
