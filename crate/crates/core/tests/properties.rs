use std::collections::BTreeSet;
use std::sync::Arc;

use cfx_core::knn::knn;
use cfx_core::mcts::{convert, ExplainerConfig, QUpdate, SearchTree};
use cfx_core::sage::init_model;
use cfx_core::{
    explain, importance, Edge, Explanation, Graph, Matrix, PerturbMode, Scorer, TrainConfig,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(seed: u64, n: usize, p: f64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let x = Matrix::from_vec(
        n,
        3,
        (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    Graph::unweighted(n, &edges, x).unwrap()
}

fn random_subset(g: &Graph, seed: u64, max: usize) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = g.edges().to_vec();
    e.shuffle(&mut rng);
    let take = rng.random_range(0..=max.min(e.len()));
    let mut out = e[..take].to_vec();
    out.sort();
    out
}

fn scorer(g: Graph, seed: u64, layers: usize) -> Scorer {
    let cfg = TrainConfig {
        hidden_dim: 4,
        num_layers: layers,
        ..Default::default()
    };
    let m = init_model(g.feature_dim(), &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    Scorer::new(Arc::new(m), Arc::new(g)).unwrap()
}

fn relabel(g: &Graph, perm: &[usize]) -> Graph {
    let n = g.num_nodes();
    let mut rows = vec![Vec::new(); n];
    for (old, &new) in perm.iter().enumerate() {
        rows[new] = g.features().row(old).to_vec();
    }
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|e| (perm[e.u()], perm[e.v()]))
        .collect();
    Graph::unweighted(n, &edges, Matrix::from_rows(&rows).unwrap()).unwrap()
}

// Whether the k-th and (k+1)-th neighbours of `v` sit at (nearly) the same
// distance, so that id order decides membership.
fn boundary_tie(emb: &Matrix, v: usize, k: usize) -> bool {
    let d = knn(emb, v, k + 1).unwrap().distances;
    d.len() > k && (d[k] - d[k - 1]).abs() < 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbation_composes(seed in any::<u64>(), n in 3usize..14) {
        let g = random_graph(seed, n, 0.4);
        let a = random_subset(&g, seed ^ 1, 4);
        let b: Vec<Edge> = random_subset(&g, seed ^ 2, 4).into_iter().filter(|e| !a.contains(e)).collect();
        let stepwise = g.perturb_edges(&a, PerturbMode::Remove).unwrap().perturb_edges(&b, PerturbMode::Remove).unwrap();
        let both: BTreeSet<Edge> = a.iter().chain(&b).copied().collect();
        let once = g.perturb_edges(&both, PerturbMode::Remove).unwrap();
        prop_assert_eq!(stepwise.edges(), once.edges());
        prop_assert_eq!(stepwise.content_hash(), once.content_hash());
    }

    #[test]
    fn perturbation_keeps_nodes_and_features(seed in any::<u64>(), n in 2usize..14, factor in 0.0f64..1.0) {
        let g = random_graph(seed, n, 0.5);
        let edges = random_subset(&g, seed, 6);
        for mode in [PerturbMode::Remove, PerturbMode::Weaken { factor }] {
            let p = g.perturb_edges(&edges, mode).unwrap();
            prop_assert_eq!(p.num_nodes(), g.num_nodes());
            prop_assert_eq!(p.features().as_slice(), g.features().as_slice());
            prop_assert!(p.num_edges() <= g.num_edges());
        }
        let removed = g.perturb_edges(&edges, PerturbMode::Remove).unwrap();
        prop_assert_eq!(removed.num_edges(), g.num_edges() - edges.len());
        for e in &edges {
            prop_assert!(!removed.has_edge(e.u(), e.v()));
        }
    }

    #[test]
    fn neighbors_are_symmetric(seed in any::<u64>(), n in 2usize..20) {
        let g = random_graph(seed, n, 0.3);
        for u in 0..n {
            for v in g.neighbors(u).unwrap() {
                prop_assert!(g.neighbors(v).unwrap().contains(&u));
                prop_assert!(g.has_edge(v, u));
            }
        }
        let total: usize = (0..n).map(|v| g.degree(v)).sum();
        prop_assert_eq!(total, 2 * g.num_edges());
    }

    #[test]
    fn importance_is_a_multiple_of_one_over_k(seed in any::<u64>(), n in 4usize..14, k in 1usize..6) {
        let g = random_graph(seed, n, 0.4);
        let s = scorer(g, seed, 2);
        let edges = random_subset(s.graph(), seed ^ 3, 5);
        let v = (seed as usize) % n;
        let imp = s.importance(&edges, v, k).unwrap();
        let k_eff = k.min(n - 1) as f64;
        let scaled = imp * k_eff;
        prop_assert!((scaled - scaled.round()).abs() < 1e-9, "importance {} at k {}", imp, k_eff);
        prop_assert!((0.0..=1.0).contains(&imp));
        prop_assert_eq!(s.importance(&[], v, k).unwrap(), 0.0);
    }

    #[test]
    fn incremental_scoring_matches_two_forward_passes(seed in any::<u64>(), n in 4usize..14, layers in 1usize..4) {
        let g = random_graph(seed, n, 0.4);
        let s = scorer(g, seed, layers);
        let edges = random_subset(s.graph(), seed ^ 4, 5);
        let v = (seed as usize) % n;
        let expl = Explanation::from_edges(v, edges.iter().copied());
        let reference = importance(s.model(), s.graph(), &expl, v, 3).unwrap();
        prop_assert_eq!(s.importance(&edges, v, 3).unwrap(), reference);
    }

    #[test]
    fn importance_ignores_node_labels(seed in any::<u64>(), n in 4usize..12) {
        let g = random_graph(seed, n, 0.45);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 5));
        let h = relabel(&g, &perm);
        let edges = random_subset(&g, seed ^ 6, 4);
        let mapped: Vec<Edge> = {
            let mut m: Vec<Edge> = edges.iter().map(|e| Edge::new(perm[e.u()], perm[e.v()])).collect();
            m.sort();
            m
        };
        let perturbed = g.perturb_edges(&edges, PerturbMode::Remove).unwrap();
        let sg = scorer(g, seed, 2);
        let sh = Scorer::new(Arc::new(sg.model().clone()), Arc::new(h)).unwrap();
        let after = sg.model().forward(&perturbed).unwrap().matrix;
        // ReLU can collapse nodes onto one embedding; where the boundary is
        // tied, id order picks the members and relabelling may legitimately
        // pick others
        for v in 0..n {
            if boundary_tie(sg.embedding(), v, 3) || boundary_tie(&after, v, 3) {
                continue;
            }
            let a = sg.importance(&edges, v, 3).unwrap();
            let b = sh.importance(&mapped, perm[v], 3).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn explanations_are_connected_subgraphs_at_the_target(seed in any::<u64>(), n in 4usize..14) {
        let g = random_graph(seed, n, 0.35);
        let s = scorer(g, seed, 2);
        let v = (seed as usize) % n;
        let cfg = ExplainerConfig { k: 2, max_iters: 60, max_subgraph_nodes: 6, seed, ..Default::default() };
        let r = explain(&s, v, &cfg).unwrap();
        let e = &r.explanation;
        e.validate(s.graph()).unwrap();
        prop_assert!(e.nodes.len() <= cfg.max_subgraph_nodes);
        if s.graph().degree(v) == 0 {
            prop_assert!(r.inexplicable);
        } else {
            prop_assert!(e.edges.iter().any(|x| x.touches(v)));
        }
        prop_assert_eq!(r.importance(), s.score(e, cfg.k).unwrap());
    }

    #[test]
    fn q_tracks_the_reward_list(seed in any::<u64>(), n in 4usize..14, restart in 0.0f64..1.0, avg in any::<bool>()) {
        let g = random_graph(seed, n, 0.4);
        let v = (seed as usize) % n;
        prop_assume!(g.degree(v) > 0);
        let update = if avg { QUpdate::Avg } else { QUpdate::Max };
        let cfg = ExplainerConfig { p_restart: restart, max_subgraph_nodes: 5, q_update: update, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = SearchTree::new(v);
        let cap = cfg.cap_for(g.avg_degree().unwrap());
        for _ in 0..40 {
            if tree.nodes[tree.root].actions.is_empty() {
                tree.nodes[tree.root].arrivals += 1;
                tree.expand(tree.root, &g, cap, cfg.proximity, &mut rng);
            }
            let traj = tree.select(&g, &cfg, cap, &mut rng);
            let expl = convert(&traj, &g, v).unwrap();
            let states: BTreeSet<usize> = traj.states().into_iter().collect();
            prop_assert!(states.len() <= cfg.max_subgraph_nodes);
            prop_assert!(expl.edges.iter().all(|e| g.has_edge(e.u(), e.v())));
            tree.backpropagate(&traj, rng.random::<f64>(), update);
            prop_assert!(tree.check_stats(update));
        }
    }
}
