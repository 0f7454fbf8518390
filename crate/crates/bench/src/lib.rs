//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use cfx_core::{
    gen_ba_shapes, train_unsupervised, BaShapesParams, FeatureKind, GroundTruth, PerturbMode,
    Scorer, TrainConfig,
};

/// A trained BA-Shapes scorer in the weaken setup, plus its ground truth.
/// `epochs` trades fixture build time for embedding quality.
pub fn ba_shapes_scorer(seed: u64, epochs: usize) -> (Scorer, GroundTruth) {
    let params = BaShapesParams {
        features: FeatureKind::Gaussian,
        ..Default::default()
    };
    let (g, gt) = gen_ba_shapes(seed, &params).expect("default parameters are valid");
    let cfg = TrainConfig {
        weighted_mean: true,
        epochs,
        ..Default::default()
    };
    let model = train_unsupervised(&g, &cfg, seed).expect("training on a generated graph");
    let scorer = Scorer::new(Arc::new(model), Arc::new(g))
        .expect("model matches graph")
        .with_mode(PerturbMode::Weaken { factor: 0.3 });
    (scorer, gt)
}
