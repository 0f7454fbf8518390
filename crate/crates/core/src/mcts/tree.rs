use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExplainerConfig, ProximityMode, QUpdate};
use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, Graph, NodeId};
use crate::linalg::cosine;

/// Per-action statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Visit count `C`.
    pub visits: u32,
    /// Value `Q`.
    pub q: f64,
    /// Every reward received, `L`.
    pub rewards: Vec<f64>,
}

impl EdgeStats {
    pub fn record(&mut self, reward: f64, update: QUpdate) {
        self.visits += 1;
        self.rewards.push(reward);
        self.q = match update {
            QUpdate::Max => self
                .rewards
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            QUpdate::Avg => self.rewards.iter().sum::<f64>() / self.rewards.len() as f64,
        };
    }
}

/// `Q + lambda * P * sqrt(ln(root_visits) / C)`; unvisited actions score `+inf`
/// and a root visited at most once contributes no exploration.
pub fn ucb(stats: &EdgeStats, root_visits: u32, lambda: f64, proximity: f64) -> f64 {
    if stats.visits == 0 {
        return f64::INFINITY;
    }
    let explore = if root_visits <= 1 {
        0.0
    } else {
        (f64::from(root_visits).ln() / f64::from(stats.visits)).sqrt()
    };
    stats.q + lambda * proximity * explore
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub child: usize,
    pub stats: EdgeStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Graph node this tree node stands on.
    pub state: NodeId,
    pub actions: Vec<Action>,
    /// Times a trajectory has ended here.
    pub arrivals: u32,
    proximity: f64,
}

/// One move along a trajectory: tree node `node` took action `action`,
/// moving from graph node `from` to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub node: usize,
    pub action: usize,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// Graph states visited: the start followed by every step's destination.
    pub fn states(&self) -> Vec<NodeId> {
        let mut s: Vec<NodeId> = self.steps.first().map(|st| st.from).into_iter().collect();
        s.extend(self.steps.iter().map(|st| st.to));
        s
    }
}

/// Subgraph traced by a trajectory: one edge per step, deduplicated.
pub fn convert(traj: &Trajectory, g: &Graph, target: NodeId) -> Result<Explanation> {
    let mut edges = Vec::with_capacity(traj.steps.len());
    for s in &traj.steps {
        if !g.has_edge(s.from, s.to) {
            return Err(Error::BrokenTrajectory(s.from, s.to));
        }
        edges.push(Edge::new(s.from, s.to));
    }
    Ok(Explanation::from_edges(target, edges))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    target: NodeId,
}

impl SearchTree {
    pub fn new(target: NodeId) -> Self {
        Self {
            nodes: vec![TreeNode {
                state: target,
                actions: Vec::new(),
                arrivals: 0,
                proximity: 1.0,
            }],
            root: 0,
            target,
        }
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    /// Sum of visit counts over the root's actions.
    pub fn root_visits(&self) -> u32 {
        self.nodes[self.root]
            .actions
            .iter()
            .map(|a| a.stats.visits)
            .sum()
    }

    fn proximity(&self, g: &Graph, mode: ProximityMode, state: NodeId) -> f64 {
        match mode {
            ProximityMode::Constant => 1.0,
            ProximityMode::Degree => g.degree(state) as f64,
            ProximityMode::CommonNeighbors => {
                let (a, b) = (g.adjacency(state), g.adjacency(self.target));
                let (mut i, mut j, mut count) = (0, 0, 0usize);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            count += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                count as f64
            }
            ProximityMode::FeatureCosine => {
                cosine(g.features().row(state), g.features().row(self.target))
            }
        }
    }

    /// Adds up to `cap` children (all when `None`) sampled without replacement
    /// from graph neighbors of the node's state that are not children yet.
    /// Returns how many were added.
    pub fn expand(
        &mut self,
        node: usize,
        g: &Graph,
        cap: Option<usize>,
        proximity: ProximityMode,
        rng: &mut impl Rng,
    ) -> usize {
        let state = self.nodes[node].state;
        let existing: Vec<NodeId> = self.nodes[node]
            .actions
            .iter()
            .map(|a| self.nodes[a.child].state)
            .collect();
        let fresh: Vec<NodeId> = g
            .adjacency(state)
            .iter()
            .map(|&(u, _)| u)
            .filter(|u| !existing.contains(u))
            .collect();
        let take = cap.map_or(fresh.len(), |c| c.min(fresh.len()));
        let mut chosen: Vec<NodeId> = if take == fresh.len() {
            fresh
        } else {
            sample(rng, fresh.len(), take)
                .into_iter()
                .map(|i| fresh[i])
                .collect()
        };
        chosen.sort_unstable();
        for s in &chosen {
            let idx = self.nodes.len();
            let p = self.proximity(g, proximity, *s);
            self.nodes.push(TreeNode {
                state: *s,
                actions: Vec::new(),
                arrivals: 0,
                proximity: p,
            });
            self.nodes[node].actions.push(Action {
                child: idx,
                stats: EdgeStats::default(),
            });
        }
        chosen.len()
    }

    /// Index of the action with the highest UCB; ties go to the lower child state.
    pub fn best_action(&self, node: usize, lambda: f64) -> Option<usize> {
        let root_visits = self.root_visits();
        let mut best: Option<(usize, f64, NodeId)> = None;
        for (i, a) in self.nodes[node].actions.iter().enumerate() {
            let child = &self.nodes[a.child];
            let score = ucb(&a.stats, root_visits, lambda, child.proximity);
            let better = match best {
                None => true,
                Some((_, s, st)) => score > s || (score == s && child.state < st),
            };
            if better {
                best = Some((i, score, child.state));
            }
        }
        best.map(|b| b.0)
    }

    fn step(&self, node: usize, action: usize) -> Step {
        Step {
            node,
            action,
            from: self.nodes[node].state,
            to: self.nodes[self.nodes[node].actions[action].child].state,
        }
    }

    /// Descends from the root, taking the best-UCB action at each interior
    /// node or, with probability `p_restart`, jumping back to the root and
    /// taking a random non-best root action. Stops at a leaf, when the
    /// trajectory spans `max_subgraph_nodes` graph nodes, or after the step
    /// guard. A leaf reached for the second time is expanded and one more step
    /// is taken.
    pub fn select(
        &mut self,
        g: &Graph,
        cfg: &ExplainerConfig,
        cap: Option<usize>,
        rng: &mut impl Rng,
    ) -> Trajectory {
        let mut traj = Trajectory::default();
        let mut states = vec![self.nodes[self.root].state];
        let max_steps = 4 * cfg.max_subgraph_nodes;
        let mut cur = self.root;
        let room = |states: &[NodeId], steps: usize| {
            states.len() < cfg.max_subgraph_nodes && steps < max_steps
        };

        while !self.nodes[cur].actions.is_empty() && room(&states, traj.steps.len()) {
            let p: f64 = rng.random();
            let (node, action) = if p < cfg.p_restart {
                let root = self.root;
                let best = self
                    .best_action(root, cfg.lambda)
                    .expect("root has actions");
                let n = self.nodes[root].actions.len();
                let a = if n > 1 {
                    let pick = rng.random_range(0..n - 1);
                    if pick >= best {
                        pick + 1
                    } else {
                        pick
                    }
                } else {
                    best
                };
                (root, a)
            } else {
                (
                    cur,
                    self.best_action(cur, cfg.lambda).expect("interior node"),
                )
            };
            let st = self.step(node, action);
            if !states.contains(&st.to) {
                states.push(st.to);
            }
            traj.steps.push(st);
            cur = self.nodes[node].actions[action].child;
        }

        self.nodes[cur].arrivals += 1;
        let leaf = self.nodes[cur].actions.is_empty();
        if leaf
            && self.nodes[cur].arrivals >= 2
            && room(&states, traj.steps.len())
            && self.expand(cur, g, cap, cfg.proximity, rng) > 0
        {
            let a = self.best_action(cur, cfg.lambda).expect("just expanded");
            let st = self.step(cur, a);
            traj.steps.push(st);
            let child = self.nodes[cur].actions[a].child;
            self.nodes[child].arrivals += 1;
        }
        traj
    }

    pub fn backpropagate(&mut self, traj: &Trajectory, reward: f64, update: QUpdate) {
        for s in &traj.steps {
            self.nodes[s.node].actions[s.action]
                .stats
                .record(reward, update);
        }
    }

    /// `C == |L|` and `Q` consistent with `L` for every action.
    pub fn check_stats(&self, update: QUpdate) -> bool {
        self.nodes.iter().flat_map(|n| &n.actions).all(|a| {
            let s = &a.stats;
            if s.visits as usize != s.rewards.len() {
                return false;
            }
            if s.rewards.is_empty() {
                return true;
            }
            let mut copy = EdgeStats::default();
            for &r in &s.rewards {
                copy.record(r, update);
            }
            copy.q == s.q
        })
    }
}
