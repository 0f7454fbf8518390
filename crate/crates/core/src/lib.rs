//! Counterfactual explanations for unsupervised node embeddings.
//!
//! Given a trained embedding model and a target node, the explainer searches
//! for a small connected subgraph around the target whose removal changes the
//! target's top-k nearest neighbors in embedding space. The search is a Monte
//! Carlo tree search whose selection step occasionally restarts at the root,
//! which keeps explanations compact around the target.
//!
//! ```no_run
//! use std::sync::Arc;
//! use cfx_core::{gen_ba_shapes, train_unsupervised, explain, BaShapesParams, ExplainerConfig, Scorer, TrainConfig};
//!
//! let (g, _truth) = gen_ba_shapes(0, &BaShapesParams::default())?;
//! let model = train_unsupervised(&g, &TrainConfig::default(), 0)?;
//! let scorer = Scorer::new(Arc::new(model), Arc::new(g))?;
//! let report = explain(&scorer, 305, &ExplainerConfig::default())?;
//! println!("{:?} importance {}", report.explanation.edges, report.importance());
//! # Ok::<(), cfx_core::Error>(())
//! ```

pub mod baselines;
pub mod error;
pub mod graph;
pub mod importance;
pub mod io;
pub mod knn;
pub mod linalg;
pub mod mcts;
pub mod metrics;
pub mod oracle;
pub mod records;
pub mod sage;
pub mod synth;

pub use baselines::{
    ablation_variant, knn_graph, onehop_2n, onehop_3n, rw_subgraph, Method, Variant,
};
pub use error::{Error, Result};
pub use graph::{Edge, Explanation, Graph, NodeId, PerturbMode, Topology};
pub use importance::{importance, Scorer};
pub use knn::{build_lsh_index, knn, KnnResult, LshIndex, LshParams};
pub use linalg::Matrix;
pub use mcts::{explain, ExplainReport, ExplainerConfig, ProximityMode};
pub use metrics::{precision_recall, validity, MetricsReport};
pub use oracle::{best_subgraph_bruteforce, monotonicity_probe};
pub use sage::{
    load_external_embedding, load_model, one_layer_distance_bound, save_model, train_unsupervised,
    Activation, Embedding, SageLayer, SageModel, TrainConfig,
};
pub use synth::{
    gen_ba_shapes, gen_tree_cycles, gen_tree_grid, load_citation, BaShapesParams, FeatureKind,
    GroundTruth, TreeMotifParams,
};
