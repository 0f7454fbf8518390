use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 10] = [
    "--set",
    "dataset.ba_shapes.base_nodes=40",
    "--set",
    "dataset.ba_shapes.n_motifs=4",
    "--set",
    "train.epochs=5",
    "--set",
    "train.hidden_dim=8",
    "--set",
    "explain.max_iters=100",
];

fn cfx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfx"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let full: Vec<&str> = SMALL.iter().copied().chain(args.iter().copied()).collect();
    let out = cfx(dir, &full);
    assert!(
        out.status.success(),
        "cfx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn trained(dir: &Path) {
    ok(
        dir,
        &["generate", "--dataset", "ba-shapes", "--out", "data"],
    );
    ok(dir, &["train", "--graph", "data", "--out", "model"]);
}

const MODEL: [&str; 6] = [
    "--graph",
    "data",
    "--model",
    "model/model.txt",
    "--ground-truth",
    "data/ground_truth.txt",
];

fn with_model<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    std::iter::once(cmd)
        .chain(MODEL)
        .chain(rest.iter().copied())
        .collect()
}

#[test]
fn generate_twice_gives_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "--seed",
            "7",
            "generate",
            "--dataset",
            "ba-shapes",
            "--out",
            "a",
        ],
    );
    ok(
        dir.path(),
        &[
            "--seed",
            "7",
            "generate",
            "--dataset",
            "ba-shapes",
            "--out",
            "b",
        ],
    );
    ok(
        dir.path(),
        &[
            "--seed",
            "8",
            "generate",
            "--dataset",
            "ba-shapes",
            "--out",
            "c",
        ],
    );
    let (a, b, c) = (
        manifest(&dir.path().join("a")),
        manifest(&dir.path().join("b")),
        manifest(&dir.path().join("c")),
    );
    assert_eq!(a["outputs"], b["outputs"]);
    assert_ne!(a["outputs"]["edges.txt"], c["outputs"]["edges.txt"]);
    assert_eq!(a["seed"], 7);
    assert!(a["outputs"].get("ground_truth.txt").is_some());
}

#[test]
fn tree_datasets_generate() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(
        dir.path(),
        &[
            "--set",
            "dataset.tree_cycles.depth=4",
            "generate",
            "--dataset",
            "tree-cycles",
            "--out",
            "t",
        ],
    );
    assert!(s.contains("60 motifs"), "{s}");
    let s = ok(
        dir.path(),
        &[
            "--set",
            "dataset.tree_grid.n_motifs=2",
            "generate",
            "--dataset",
            "tree-grid",
            "--out",
            "g",
        ],
    );
    assert!(s.contains("2 motifs"), "{s}");
}

#[test]
fn explain_then_evaluate_reports_the_metric_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    ok(d, &with_model("explain", &["--out", "unr"]));
    let records = std::fs::read_to_string(d.join("unr/explanations.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 20);
    ok(
        d,
        &with_model(
            "evaluate",
            &["--explanations", "unr/explanations.jsonl", "--out", "eval"],
        ),
    );
    let metrics = std::fs::read_to_string(d.join("eval/metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "target,method,importance,size,precision,recall,valid,pn,homogeneity"
    );
    let summary = std::fs::read_to_string(d.join("eval/summary.csv")).unwrap();
    let methods: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, vec!["input_graph", "unr"]);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("eval/report.json")).unwrap()).unwrap();
    assert!(report["config"].get("workers").is_none());
    assert_eq!(report["rows"].as_array().unwrap().len(), 40);
}

#[test]
fn ablate_all_variants_gives_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let stdout = ok(
        d,
        &with_model("ablate", &["--targets", "40,41,42", "--out", "ab"]),
    );
    let csv = std::fs::read_to_string(d.join("ab/ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("variant,targets,mean_importance,mean_size"));
    assert!(!csv.contains("time"));
    assert_eq!(stdout.lines().filter(|l| l.contains("time")).count(), 9);
    assert_eq!(
        manifest(&d.join("ab"))["timing"]["parts"]
            .as_object()
            .unwrap()
            .len(),
        9
    );
}

#[test]
fn sweep_and_oracle_and_importance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    ok(
        d,
        &with_model(
            "sweep",
            &[
                "--targets",
                "40,41",
                "--axis",
                "p_restart",
                "--values",
                "0,0.2",
                "--out",
                "sw",
            ],
        ),
    );
    let csv = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("p_restart,mean_importance,mean_size"));

    ok(
        d,
        &with_model(
            "oracle",
            &["--targets", "40", "--max-edges", "2", "--out", "or"],
        ),
    );
    let oracle = std::fs::read_to_string(d.join("or/oracle.csv")).unwrap();
    assert_eq!(oracle.lines().count(), 2);

    let json = ok(
        d,
        &[
            "importance",
            "--graph",
            "data",
            "--model",
            "model/model.txt",
            "--target",
            "40",
            "--edges",
            "",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["importance"], 0.0);
    assert_eq!(v["neighbors"].as_array().unwrap().len(), 5);
}

#[test]
fn rw_baseline_needs_no_extra_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    ok(
        d,
        &with_model(
            "explain",
            &[
                "--method",
                "rw-g-restart",
                "--targets",
                "sample:5",
                "--out",
                "rw",
            ],
        ),
    );
    let text = std::fs::read_to_string(d.join("rw/explanations.jsonl")).unwrap();
    assert!(text
        .lines()
        .all(|l| l.contains("\"method\":\"rw-g-restart\"")));
}

#[test]
fn errors_exit_nonzero_with_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cfx(d, &["train", "--graph", "missing", "--out", "m"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("error:") && err.contains("missing") && err.contains("hint:"),
        "{err}"
    );

    let out = cfx(
        d,
        &[
            "--set",
            "explain.kay=3",
            "generate",
            "--dataset",
            "ba-shapes",
            "--out",
            "x",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("kay"));

    std::fs::write(d.join("bad.toml"), "[explain]\np_restart = 3.0\n").unwrap();
    let out = cfx(
        d,
        &[
            "--config",
            "bad.toml",
            "generate",
            "--dataset",
            "ba-shapes",
            "--out",
            "x",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_restart"));

    let out = cfx(d, &["generate", "--dataset", "citation", "--out", "x"]);
    assert!(!out.status.success());
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let before: Vec<Vec<u8>> = ["data/edges.txt", "data/features.csv", "model/model.txt"]
        .iter()
        .map(|p| std::fs::read(d.join(p)).unwrap())
        .collect();
    ok(
        d,
        &with_model("explain", &["--targets", "sample:3", "--out", "e"]),
    );
    let after: Vec<Vec<u8>> = ["data/edges.txt", "data/features.csv", "model/model.txt"]
        .iter()
        .map(|p| std::fs::read(d.join(p)).unwrap())
        .collect();
    assert_eq!(before, after);
}
