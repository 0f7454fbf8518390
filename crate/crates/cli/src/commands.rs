//! Subcommands. Each writes its files plus `manifest.json` into `--out`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cfx_core::mcts::explain;
use cfx_core::metrics::{
    pn_flag, split_edges, sweep_csv, test_partners, HomogeneityProbe, MetricRow, SweepAxis,
    SweepPoint, INPUT_GRAPH,
};
use cfx_core::records::{read_records, write_records, ExplanationRecord};
use cfx_core::{
    best_subgraph_bruteforce, gen_ba_shapes, gen_tree_cycles, gen_tree_grid, io, load_citation,
    monotonicity_probe, precision_recall, save_model, train_unsupervised, Edge, Explanation, Graph,
    GroundTruth, Method, MetricsReport, Scorer, Variant,
};
use clap::{Args, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::manifest::{Manifest, Recorder, MANIFEST};
use crate::pipeline::{ablation_record, explain_with, load_graph, load_inputs, par_map, Targets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dataset {
    BaShapes,
    TreeCycles,
    TreeGrid,
    /// An external citation network (`--edges`, `--features`, `--labels`).
    Citation,
}

/// Graph, model and ground-truth paths shared by the explaining commands.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Graph directory written by `generate`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// `ground_truth.txt` written by `generate`.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Generate a synthetic graph or import a citation network.
    Generate {
        #[arg(long, value_enum)]
        dataset: Dataset,
        #[arg(long, required_if_eq("dataset", "citation"))]
        edges: Option<PathBuf>,
        #[arg(long, required_if_eq("dataset", "citation"))]
        features: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the unsupervised embedding model.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain targets with one method.
    Explain {
        #[command(flatten)]
        #[serde(flatten)]
        inputs: ModelArgs,
        #[arg(long, default_value = "unr")]
        method: Method,
        /// motif, all, sample:N or a comma-separated id list.
        #[arg(long, default_value = "motif")]
        targets: Targets,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score explanation files.
    Evaluate {
        #[command(flatten)]
        #[serde(flatten)]
        inputs: ModelArgs,
        /// One or more `explanations.jsonl` files.
        #[arg(long, required = true, num_args = 1..)]
        explanations: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run search variants side by side.
    Ablate {
        #[command(flatten)]
        #[serde(flatten)]
        inputs: ModelArgs,
        #[arg(long, default_value = "motif")]
        targets: Targets,
        /// Comma-separated variants; all of them by default.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean importance as one explainer setting varies.
    Sweep {
        #[command(flatten)]
        #[serde(flatten)]
        inputs: ModelArgs,
        #[arg(long, default_value = "motif")]
        targets: Targets,
        /// k, p_restart or lambda.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the importance of an edge set as JSON.
    Importance {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: usize,
        /// Edges as `u-v`, comma-separated.
        #[arg(long, default_value = "", value_delimiter = ',')]
        edges: Vec<String>,
    },
    /// Compare the search against exhaustive enumeration on a small graph.
    Oracle {
        #[command(flatten)]
        #[serde(flatten)]
        inputs: ModelArgs,
        #[arg(long, default_value = "all")]
        targets: Targets,
        #[arg(long, default_value_t = 3)]
        max_edges: usize,
        /// Nested pairs drawn per target for the monotonicity probe.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Train { .. } => "train",
            Command::Explain { .. } => "explain",
            Command::Evaluate { .. } => "evaluate",
            Command::Ablate { .. } => "ablate",
            Command::Sweep { .. } => "sweep",
            Command::Importance { .. } => "importance",
            Command::Oracle { .. } => "oracle",
            Command::Replay { .. } => "replay",
        }
    }

    fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Generate { out, .. }
            | Command::Train { out, .. }
            | Command::Explain { out, .. }
            | Command::Evaluate { out, .. }
            | Command::Ablate { out, .. }
            | Command::Sweep { out, .. }
            | Command::Oracle { out, .. }
            | Command::Replay { out, .. } => Some(out),
            Command::Importance { .. } => None,
        }
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

fn write(rec: &mut Recorder, out: &Path, name: &str, contents: &str) -> Result<()> {
    let p = out.join(name);
    std::fs::write(&p, contents).with_context(|| format!("cannot write {}", p.display()))?;
    rec.output(p);
    Ok(())
}

fn write_jsonl(
    rec: &mut Recorder,
    out: &Path,
    name: &str,
    records: &[ExplanationRecord],
) -> Result<()> {
    let p = out.join(name);
    write_records(&p, records)?;
    rec.output(p);
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs `cmd` under `config`. Returns the manifest for commands that write one.
pub fn execute(cmd: &Command, config: &Config) -> Result<Option<Manifest>> {
    let mut rec = Recorder::new();
    let invocation = serde_json::to_value(cmd)?;
    let out = match cmd {
        Command::Importance {
            graph,
            model,
            target,
            edges,
        } => {
            importance(graph, model, *target, edges, config, &mut rec)?;
            return Ok(None);
        }
        Command::Replay { manifest, out } => {
            replay(manifest, out)?;
            return Ok(None);
        }
        Command::Generate {
            dataset,
            edges,
            features,
            labels,
            out,
        } => {
            prepare_out(out)?;
            generate(
                *dataset,
                edges.as_deref(),
                features.as_deref(),
                labels.as_deref(),
                out,
                config,
                &mut rec,
            )?;
            out
        }
        Command::Train { graph, out } => {
            prepare_out(out)?;
            let g = load_graph(graph, &mut rec)?;
            let model = train_unsupervised(&g, &config.train, config.seed)?;
            let p = out.join("model.txt");
            save_model(&model, &p)?;
            rec.output(p);
            println!(
                "trained {} layers on {} nodes, model hash {}",
                model.layers().len(),
                g.num_nodes(),
                model.content_hash()
            );
            out
        }
        Command::Explain {
            inputs,
            method,
            targets,
            out,
        } => {
            prepare_out(out)?;
            explain_cmd(inputs, *method, targets, out, config, &mut rec)?;
            out
        }
        Command::Evaluate {
            inputs,
            explanations,
            out,
        } => {
            prepare_out(out)?;
            evaluate(inputs, explanations, out, config, &mut rec)?;
            out
        }
        Command::Ablate {
            inputs,
            targets,
            variants,
            out,
        } => {
            prepare_out(out)?;
            ablate(inputs, targets, variants, out, config, &mut rec)?;
            out
        }
        Command::Sweep {
            inputs,
            targets,
            axis,
            values,
            out,
        } => {
            prepare_out(out)?;
            sweep(inputs, targets, *axis, values, out, config, &mut rec)?;
            out
        }
        Command::Oracle {
            inputs,
            targets,
            max_edges,
            samples,
            out,
        } => {
            prepare_out(out)?;
            oracle(inputs, targets, *max_edges, *samples, out, config, &mut rec)?;
            out
        }
    };
    let m = rec.finish(cmd.name(), invocation, config, out)?;
    info!("{} finished in {:.2}s", cmd.name(), m.timing.elapsed_secs);
    Ok(Some(m))
}

fn generate(
    dataset: Dataset,
    edges: Option<&Path>,
    features: Option<&Path>,
    labels: Option<&Path>,
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let d = &config.dataset;
    let (g, gt): (Graph, Option<GroundTruth>) = match dataset {
        Dataset::BaShapes => {
            let (g, gt) = gen_ba_shapes(config.seed, &d.ba_shapes)?;
            (g, Some(gt))
        }
        Dataset::TreeCycles => {
            let (g, gt) = gen_tree_cycles(config.seed, &d.tree_cycles)?;
            (g, Some(gt))
        }
        Dataset::TreeGrid => {
            let (g, gt) = gen_tree_grid(config.seed, &d.tree_grid)?;
            (g, Some(gt))
        }
        Dataset::Citation => {
            let (e, f) = (
                edges.expect("clap requires --edges"),
                features.expect("clap requires --features"),
            );
            rec.input(e)?;
            rec.input(f)?;
            if let Some(l) = labels {
                rec.input(l)?;
            }
            (load_citation(e, f, labels)?, None)
        }
    };
    io::write_graph_dir(out, &g)?;
    for name in ["edges.txt", "features.csv", "labels.csv"] {
        let p = out.join(name);
        if p.exists() {
            rec.output(p);
        }
    }
    if let Some(gt) = &gt {
        write(rec, out, "ground_truth.txt", &gt.to_text())?;
    }
    println!(
        "{} nodes, {} edges, {} motifs, graph hash {}",
        g.num_nodes(),
        g.num_edges(),
        gt.as_ref().map_or(0, |t| t.motifs().len()),
        g.content_hash()
    );
    Ok(())
}

fn explain_cmd(
    inputs: &ModelArgs,
    method: Method,
    targets: &Targets,
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(
        &inputs.graph,
        &inputs.model,
        inputs.ground_truth.as_ref(),
        config.perturb,
        rec,
    )?;
    let ts = targets.resolve(inp.graph(), inp.gt.as_ref(), config.seed)?;
    let cfg = config.explainer();
    let records = par_map(config.workers, &ts, |&v| {
        explain_with(&inp.scorer, v, method, &cfg)
    })?;
    write_jsonl(rec, out, "explanations.jsonl", &records)?;
    println!(
        "{}: {} targets, mean importance {:.4}, mean size {:.3}",
        method,
        records.len(),
        mean(records.iter().map(|r| r.importance)),
        mean(records.iter().map(|r| r.size as f64))
    );
    Ok(())
}

fn evaluate(
    inputs: &ModelArgs,
    files: &[PathBuf],
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(
        &inputs.graph,
        &inputs.model,
        inputs.ground_truth.as_ref(),
        config.perturb,
        rec,
    )?;
    let g = inp.graph();
    let mut records = Vec::new();
    for f in files {
        rec.input(f)?;
        records.extend(read_records(f)?);
    }
    let k = config.explain.k;
    let ev = &config.eval;

    // the link-prediction check needs a model that never saw the held-out edges
    let pn = if ev.test_fraction > 0.0 {
        let (train_g, test) = split_edges(g, ev.test_fraction, config.seed)?;
        let model = train_unsupervised(&train_g, &config.train, config.seed)?;
        let s = Scorer::new(Arc::new(model), Arc::new(train_g))?.with_mode(config.perturb);
        Some((s, test_partners(&test)))
    } else {
        None
    };
    let n_clusters = ev.clusters.or(g.num_classes()).unwrap_or(8);
    let probe = HomogeneityProbe::new(&inp.scorer, n_clusters, ev.homogeneity_k, config.seed)?;

    let pn_of = |e: &Explanation| -> Result<Option<bool>> {
        let Some((s, partners)) = &pn else {
            return Ok(None);
        };
        let kept: Vec<Edge> = e
            .edges
            .iter()
            .copied()
            .filter(|x| s.graph().has_edge(x.u(), x.v()))
            .collect();
        Ok(pn_flag(
            s,
            &Explanation::from_edges(e.target, kept),
            partners,
            ev.hit_k,
        )?)
    };

    let mut rows = par_map(config.workers, &records, |r| {
        let e = r.explanation();
        e.validate(g)
            .with_context(|| format!("explanation of node {} by {}", r.target, r.method))?;
        let importance = inp.scorer.score(&e, k)?;
        let (precision, recall) = match &inp.gt {
            Some(gt) if gt.in_motif(r.target) => {
                let (p, q) = precision_recall(&e, gt);
                (Some(p), Some(q))
            }
            _ => (None, None),
        };
        Ok(MetricRow {
            target: r.target,
            method: r.method.clone(),
            importance,
            size: e.size(),
            precision,
            recall,
            valid: importance >= 1.0,
            pn: pn_of(&e)?,
            homogeneity: Some(probe.homogeneity(&inp.scorer, &e)?),
        })
    })?;
    let targets: Vec<usize> = records
        .iter()
        .map(|r| r.target)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    rows.extend(par_map(config.workers, &targets, |&v| {
        let e = Explanation::empty(v);
        Ok(MetricRow {
            target: v,
            method: INPUT_GRAPH.to_string(),
            importance: 0.0,
            size: 0,
            precision: None,
            recall: None,
            valid: false,
            pn: pn_of(&e)?,
            homogeneity: Some(probe.homogeneity(&inp.scorer, &e)?),
        })
    })?);

    // the worker count never changes results, so it stays out of the snapshot
    let mut snapshot = serde_json::to_value(config)?;
    if let Some(o) = snapshot.as_object_mut() {
        o.remove("workers");
    }
    let mut report = MetricsReport::new(snapshot);
    for r in rows {
        report.push(r);
    }
    report.sort();
    write(rec, out, "metrics.csv", &report.rows_csv())?;
    let summary = report.summary_csv();
    write(rec, out, "summary.csv", &summary)?;
    write(
        rec,
        out,
        "report.json",
        &(serde_json::to_string_pretty(&report.to_json())? + "\n"),
    )?;
    print!("{summary}");
    Ok(())
}

fn incident(r: &ExplanationRecord) -> f64 {
    r.edges
        .iter()
        .filter(|&&(u, v)| u == r.target || v == r.target)
        .count() as f64
}

fn ablate(
    inputs: &ModelArgs,
    targets: &Targets,
    variants: &[Variant],
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(
        &inputs.graph,
        &inputs.model,
        inputs.ground_truth.as_ref(),
        config.perturb,
        rec,
    )?;
    let ts = targets.resolve(inp.graph(), inp.gt.as_ref(), config.seed)?;
    let cfg = config.explainer();
    let variants: Vec<Variant> = if variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        variants.to_vec()
    };

    let mut csv = String::from(
        "variant,targets,mean_importance,mean_size,mean_incident_edges,precision,recall\n",
    );
    let mut all = Vec::new();
    for &variant in &variants {
        let t = Instant::now();
        let records = par_map(config.workers, &ts, |&v| {
            ablation_record(&inp.scorer, v, variant, &cfg)
        })?;
        let secs = t.elapsed().as_secs_f64();
        rec.parts.insert(variant.name().to_string(), secs);
        let (p, r) = match &inp.gt {
            Some(gt) => {
                let pr: Vec<(f64, f64)> = records
                    .iter()
                    .filter(|r| gt.in_motif(r.target))
                    .map(|r| precision_recall(&r.explanation(), gt))
                    .collect();
                if pr.is_empty() {
                    (String::new(), String::new())
                } else {
                    (
                        mean(pr.iter().map(|x| x.0)).to_string(),
                        mean(pr.iter().map(|x| x.1)).to_string(),
                    )
                }
            }
            None => (String::new(), String::new()),
        };
        let imp = mean(records.iter().map(|r| r.importance));
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            variant,
            records.len(),
            imp,
            mean(records.iter().map(|r| r.size as f64)),
            mean(records.iter().map(incident)),
            p,
            r
        )?;
        println!(
            "{:<16} importance {:.4}  time {:.3}s",
            variant.name(),
            imp,
            secs
        );
        all.extend(records);
    }
    write(rec, out, "ablation.csv", &csv)?;
    write_jsonl(rec, out, "ablation.jsonl", &all)?;
    Ok(())
}

fn sweep(
    inputs: &ModelArgs,
    targets: &Targets,
    axis: SweepAxis,
    values: &[f64],
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(
        &inputs.graph,
        &inputs.model,
        inputs.ground_truth.as_ref(),
        config.perturb,
        rec,
    )?;
    let ts = targets.resolve(inp.graph(), inp.gt.as_ref(), config.seed)?;
    let base = config.explainer();
    let mut points = Vec::new();
    for &value in values {
        let cfg = axis.apply(&base, value)?;
        let t = Instant::now();
        let reports = par_map(config.workers, &ts, |&v| Ok(explain(&inp.scorer, v, &cfg)?))?;
        rec.parts.insert(
            format!("{}={}", axis.name(), value),
            t.elapsed().as_secs_f64(),
        );
        points.push(SweepPoint {
            value,
            mean_importance: mean(reports.iter().map(|r| r.importance())),
            mean_size: mean(reports.iter().map(|r| r.explanation.size() as f64)),
        });
    }
    let csv = sweep_csv(axis, &points);
    write(rec, out, "sweep.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn parse_edges(specs: &[String]) -> Result<Vec<Edge>> {
    let mut out = BTreeSet::new();
    for s in specs.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let (u, v) = s
            .split_once('-')
            .with_context(|| format!("edge `{s}` is not of the form u-v"))?;
        let (u, v): (usize, usize) = (u.trim().parse()?, v.trim().parse()?);
        if u == v {
            bail!("edge `{s}` is a self-loop");
        }
        out.insert(Edge::new(u, v));
    }
    Ok(out.into_iter().collect())
}

fn importance(
    graph: &Path,
    model: &Path,
    target: usize,
    edges: &[String],
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(graph, model, None, config.perturb, rec)?;
    let edges = parse_edges(edges)?;
    let k = config.explain.k;
    let e = Explanation::from_edges(target, edges.iter().copied());
    e.validate(inp.graph())?;
    let imp = inp.scorer.importance(&edges, target, k)?;
    let before = inp.scorer.base_knn(target, k)?;
    let json = serde_json::json!({
        "target": target,
        "k": k,
        "perturb": config.perturb,
        "edges": edges.iter().map(|e| (e.u(), e.v())).collect::<Vec<_>>(),
        "importance": imp,
        "neighbors": before.neighbors,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    inputs: &ModelArgs,
    targets: &Targets,
    max_edges: usize,
    samples: usize,
    out: &Path,
    config: &Config,
    rec: &mut Recorder,
) -> Result<()> {
    let inp = load_inputs(
        &inputs.graph,
        &inputs.model,
        inputs.ground_truth.as_ref(),
        config.perturb,
        rec,
    )?;
    let ts = targets.resolve(inp.graph(), inp.gt.as_ref(), config.seed)?;
    let cfg = config.explainer();
    let k = cfg.k;
    let rows = par_map(config.workers, &ts, |&v| {
        let (best, best_imp) = best_subgraph_bruteforce(&inp.scorer, v, k, max_edges)?;
        let unr = explain(&inp.scorer, v, &Variant::Unr.config(&cfg))?;
        let rate = monotonicity_probe(&inp.scorer, v, k, samples, cfg.target_seed(v))?;
        let ratio = if best_imp > 0.0 {
            unr.importance() / best_imp
        } else {
            1.0
        };
        Ok(format!(
            "{v},{best_imp},{},{},{},{ratio},{rate}\n",
            best.size(),
            unr.importance(),
            unr.explanation.size()
        ))
    })?;
    let mut csv = String::from(
        "target,oracle_importance,oracle_size,unr_importance,unr_size,ratio,violation_rate\n",
    );
    csv.extend(rows);
    write(rec, out, "oracle.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn replay(manifest: &Path, out: &Path) -> Result<()> {
    let m = Manifest::read(manifest)?;
    let mut cmd: Command = serde_json::from_value(m.invocation.clone()).with_context(|| {
        format!(
            "{} records an invocation this version cannot read",
            manifest.display()
        )
    })?;
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest was written by version {}, replaying with {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let slot = cmd
        .out_mut()
        .context("recorded command has no output directory")?;
    *slot = out.to_path_buf();
    if matches!(cmd, Command::Replay { .. }) {
        bail!("refusing to replay a replay");
    }
    let fresh =
        execute(&cmd, &m.config)?.expect("commands with an output directory write a manifest");
    let diff: BTreeMap<String, (Option<&String>, Option<&String>)> = m
        .differing_outputs(&fresh)
        .into_iter()
        .map(|n| {
            let pair = (m.outputs.get(&n), fresh.outputs.get(&n));
            (n, pair)
        })
        .collect();
    if diff.is_empty() {
        println!(
            "replay identical: {} outputs match {}",
            fresh.outputs.len(),
            out.join(MANIFEST).display()
        );
        Ok(())
    } else {
        for (n, (a, b)) in &diff {
            eprintln!(
                "{n}: recorded {} now {}",
                a.map_or("-", |s| s),
                b.map_or("-", |s| s)
            );
        }
        bail!("replay differs in {} output file(s)", diff.len())
    }
}
