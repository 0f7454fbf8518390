use std::sync::Arc;

use cfx_core::io::{read_graph_dir, write_graph_dir};
use cfx_core::records::{read_records, write_records, ExplanationRecord};
use cfx_core::synth::{gen_ba_shapes, BaShapesParams, FeatureKind};
use cfx_core::{
    explain, load_model, save_model, train_unsupervised, ExplainerConfig, Scorer, TrainConfig,
};

fn small_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden_dim: 8,
        ..Default::default()
    }
}

#[test]
fn graph_directory_round_trip_keeps_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let params = BaShapesParams {
        features: FeatureKind::Gaussian,
        ..Default::default()
    };
    let (g, _) = gen_ba_shapes(3, &params).unwrap();
    write_graph_dir(dir.path(), &g).unwrap();
    let back = read_graph_dir(dir.path()).unwrap();
    assert_eq!(back.content_hash(), g.content_hash());
}

#[test]
fn saved_model_gives_identical_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let params = BaShapesParams {
        features: FeatureKind::Gaussian,
        ..Default::default()
    };
    let (g, _) = gen_ba_shapes(1, &params).unwrap();
    let m = train_unsupervised(&g, &small_cfg(), 4).unwrap();
    let path = dir.path().join("model.txt");
    save_model(&m, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.content_hash(), m.content_hash());
    assert_eq!(
        back.forward(&g).unwrap().matrix,
        m.forward(&g).unwrap().matrix
    );
}

#[test]
fn explanation_records_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let params = BaShapesParams {
        features: FeatureKind::Gaussian,
        ..Default::default()
    };
    let (g, gt) = gen_ba_shapes(2, &params).unwrap();
    let m = train_unsupervised(&g, &small_cfg(), 0).unwrap();
    let s = Scorer::new(Arc::new(m), Arc::new(g)).unwrap();
    let cfg = ExplainerConfig {
        max_iters: 50,
        ..Default::default()
    };
    let records: Vec<ExplanationRecord> = gt
        .motif_members()
        .into_iter()
        .take(5)
        .map(|v| {
            let r = explain(&s, v, &cfg).unwrap();
            ExplanationRecord::new("unr", &r.explanation, r.importance())
        })
        .collect();
    let path = dir.path().join("x.jsonl");
    write_records(&path, &records).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back, records);
    for r in &back {
        assert_eq!(s.score(&r.explanation(), cfg.k).unwrap(), r.importance);
    }
}
