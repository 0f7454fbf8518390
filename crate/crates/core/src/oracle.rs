//! Exhaustive search over small connected edge sets, for checking the
//! tree search on desk-sized graphs.

use std::collections::{BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, Graph, NodeId};
use crate::importance::Scorer;

/// Largest candidate pool the brute force will evaluate.
pub const CANDIDATE_LIMIT: usize = 1_000_000;

fn frontier(g: &Graph, set: &[Edge], v: NodeId) -> BTreeSet<Edge> {
    let mut nodes = BTreeSet::from([v]);
    for e in set {
        nodes.insert(e.u());
        nodes.insert(e.v());
    }
    let mut out = BTreeSet::new();
    for &u in &nodes {
        for &(w, _) in g.adjacency(u) {
            let e = Edge::new(u, w);
            if set.binary_search(&e).is_err() {
                out.insert(e);
            }
        }
    }
    out
}

/// Every connected edge set touching `v` with 1..=`max_edges` edges, each
/// sorted, in order of size then lexicographic order.
pub fn connected_edge_sets(g: &Graph, v: NodeId, max_edges: usize) -> Result<Vec<Vec<Edge>>> {
    g.check_node(v)?;
    let mut all = Vec::new();
    let mut level: Vec<Vec<Edge>> = vec![Vec::new()];
    for _ in 0..max_edges {
        let mut next: HashSet<Vec<Edge>> = HashSet::new();
        for set in &level {
            for e in frontier(g, set, v) {
                let mut s = set.clone();
                let pos = s.binary_search(&e).unwrap_err();
                s.insert(pos, e);
                next.insert(s);
            }
            if all.len() + next.len() > CANDIDATE_LIMIT {
                return Err(Error::GuardExceeded {
                    at_least: all.len() + next.len(),
                    limit: CANDIDATE_LIMIT,
                });
            }
        }
        let mut next: Vec<Vec<Edge>> = next.into_iter().collect();
        next.sort();
        if next.is_empty() {
            break;
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    Ok(all)
}

/// Best explanation among all connected edge sets touching `v` with at most
/// `max_edges` edges: highest importance, then fewest edges, then the
/// lexicographically smallest edge list. An isolated target yields the empty
/// explanation with importance 0.
pub fn best_subgraph_bruteforce(
    scorer: &Scorer,
    v: NodeId,
    k: usize,
    max_edges: usize,
) -> Result<(Explanation, f64)> {
    let original = scorer.base_knn(v, k)?;
    let mut best: Option<(Vec<Edge>, f64)> = None;
    for set in connected_edge_sets(scorer.graph(), v, max_edges)? {
        let imp = scorer.importance_against(&original, &set)?;
        let better = match &best {
            None => true,
            Some((b, bi)) => {
                imp > *bi
                    || (imp == *bi && (set.len() < b.len() || (set.len() == b.len() && set < *b)))
            }
        };
        if better {
            best = Some((set, imp));
        }
    }
    Ok(match best {
        Some((edges, imp)) => (Explanation::from_edges(v, edges).with_importance(imp), imp),
        None => (Explanation::empty(v).with_importance(0.0), 0.0),
    })
}

/// Grows a random connected edge set of `size` edges from `v`; stops early
/// when nothing is left to add.
fn random_connected(g: &Graph, v: NodeId, size: usize, rng: &mut impl Rng) -> Vec<Edge> {
    let mut set: Vec<Edge> = Vec::new();
    while set.len() < size {
        let f: Vec<Edge> = frontier(g, &set, v).into_iter().collect();
        let Some(&e) = f.choose(rng) else { break };
        let pos = set.binary_search(&e).unwrap_err();
        set.insert(pos, e);
    }
    set
}

/// Fraction of sampled nested pairs `E2 ⊂ E1` around `v` where the smaller
/// set scores strictly higher. `E1` is a random connected set of 2 to 4
/// edges and `E2` drops one of its edges at random. Returns 0 when `v` has
/// fewer than two reachable edges.
pub fn monotonicity_probe(
    scorer: &Scorer,
    v: NodeId,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let g = scorer.graph();
    g.check_node(v)?;
    let original = scorer.base_knn(v, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut drawn = 0usize;
    for _ in 0..samples {
        let size = rng.random_range(2..=4);
        let e1 = random_connected(g, v, size, &mut rng);
        if e1.len() < 2 {
            continue;
        }
        let mut e2 = e1.clone();
        e2.remove(rng.random_range(0..e2.len()));
        drawn += 1;
        if scorer.importance_against(&original, &e2)? > scorer.importance_against(&original, &e1)? {
            violations += 1;
        }
    }
    Ok(if drawn == 0 {
        0.0
    } else {
        violations as f64 / drawn as f64
    })
}
