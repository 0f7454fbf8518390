//! Shared steps of the commands: loading inputs, choosing targets and
//! running explainers over them in a worker pool.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cfx_core::mcts::explain;
use cfx_core::records::ExplanationRecord;
use cfx_core::{
    io, load_model, ExplainerConfig, Explanation, Graph, GroundTruth, Method, NodeId, PerturbMode,
    Scorer, Variant,
};
use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::Recorder;

/// Which nodes to explain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Targets {
    /// Every node of a planted motif; needs ground truth.
    Motif,
    All,
    /// `n` distinct nodes drawn with the run seed, sorted.
    Sample(usize),
    List(Vec<NodeId>),
}

impl FromStr for Targets {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "motif" => Targets::Motif,
            "all" => Targets::All,
            _ => {
                if let Some(n) = s.strip_prefix("sample:") {
                    Targets::Sample(
                        n.parse()
                            .with_context(|| format!("bad sample size in `{s}`"))?,
                    )
                } else {
                    let ids: Result<Vec<NodeId>, _> =
                        s.split(',').map(|t| t.trim().parse()).collect();
                    Targets::List(ids.with_context(|| {
                        format!("targets `{s}` are not motif, all, sample:N or a comma-separated id list")
                    })?)
                }
            }
        })
    }
}

impl fmt::Display for Targets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Targets::Motif => f.write_str("motif"),
            Targets::All => f.write_str("all"),
            Targets::Sample(n) => write!(f, "sample:{n}"),
            Targets::List(ids) => {
                let s: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

impl TryFrom<String> for Targets {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Targets> for String {
    fn from(t: Targets) -> String {
        t.to_string()
    }
}

impl Targets {
    pub fn resolve(&self, g: &Graph, gt: Option<&GroundTruth>, seed: u64) -> Result<Vec<NodeId>> {
        let n = g.num_nodes();
        let mut out = match self {
            Targets::Motif => match gt {
                Some(gt) => gt.motif_members(),
                None => bail!("--targets motif needs --ground-truth"),
            },
            Targets::All => (0..n).collect(),
            Targets::Sample(k) => {
                if *k > n {
                    bail!("cannot sample {k} targets from {n} nodes");
                }
                sample(&mut ChaCha8Rng::seed_from_u64(seed), n, *k).into_vec()
            }
            Targets::List(ids) => {
                for &v in ids {
                    g.check_node(v)?;
                }
                ids.clone()
            }
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Graph, optional ground truth and a scorer, as read from disk.
pub struct Inputs {
    pub scorer: Scorer,
    pub gt: Option<GroundTruth>,
}

impl Inputs {
    pub fn graph(&self) -> &Graph {
        self.scorer.graph()
    }
}

pub fn load_graph(dir: &Path, rec: &mut Recorder) -> Result<Graph> {
    rec.input_dir(dir)?;
    io::read_graph_dir(dir)
        .with_context(|| format!("cannot load graph directory {}", dir.display()))
}

pub fn load_inputs(
    graph: &Path,
    model: &Path,
    ground_truth: Option<&PathBuf>,
    mode: PerturbMode,
    rec: &mut Recorder,
) -> Result<Inputs> {
    let g = load_graph(graph, rec)?;
    rec.input(model)?;
    let m = load_model(model).with_context(|| format!("cannot load model {}", model.display()))?;
    if matches!(mode, PerturbMode::Weaken { .. }) && !m.weighted_mean() {
        warn!("weaken perturbation has no effect on a model without the weighted mean aggregator");
    }
    let gt = match ground_truth {
        Some(p) => {
            rec.input(p)?;
            Some(GroundTruth::read(p)?)
        }
        None => None,
    };
    let scorer = Scorer::new(Arc::new(m), Arc::new(g))?.with_mode(mode);
    Ok(Inputs { scorer, gt })
}

/// Maps `f` over `items` on `workers` threads, keeping input order.
pub fn par_map<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn variant_record(
    scorer: &Scorer,
    v: NodeId,
    variant: Variant,
    cfg: &ExplainerConfig,
    name: &str,
) -> Result<ExplanationRecord> {
    let r = explain(scorer, v, &variant.config(cfg))?;
    let mut rec = ExplanationRecord::new(name, &r.explanation, r.importance());
    rec.iterations = r.iterations;
    rec.inexplicable = r.inexplicable;
    Ok(rec)
}

/// One explanation record for `method` at `v`. The random-walk baselines
/// first run the restart search to get their reference size.
pub fn explain_with(
    scorer: &Scorer,
    v: NodeId,
    method: Method,
    cfg: &ExplainerConfig,
) -> Result<ExplanationRecord> {
    match method {
        Method::Unr => variant_record(scorer, v, Variant::Unr, cfg, method.name()),
        Method::UnrNoRestart => {
            variant_record(scorer, v, Variant::UnrNoRestart, cfg, method.name())
        }
        _ => {
            let reference = if method.needs_reference_size() {
                Some(
                    explain(scorer, v, &Variant::Unr.config(cfg))?
                        .explanation
                        .size(),
                )
            } else {
                None
            };
            let e: Explanation = method.run(scorer, v, cfg, reference)?;
            let imp = e.importance.unwrap_or(0.0);
            let mut rec = ExplanationRecord::new(method.name(), &e, imp);
            rec.inexplicable = scorer.graph().degree(v) == 0;
            Ok(rec)
        }
    }
}

pub fn ablation_record(
    scorer: &Scorer,
    v: NodeId,
    variant: Variant,
    cfg: &ExplainerConfig,
) -> Result<ExplanationRecord> {
    variant_record(scorer, v, variant, cfg, variant.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfx_core::Matrix;

    #[test]
    fn target_specs() {
        assert_eq!("motif".parse::<Targets>().unwrap(), Targets::Motif);
        assert_eq!("sample:4".parse::<Targets>().unwrap(), Targets::Sample(4));
        assert_eq!(
            "3, 1,2".parse::<Targets>().unwrap(),
            Targets::List(vec![3, 1, 2])
        );
        assert!("some".parse::<Targets>().is_err());
        for s in ["motif", "all", "sample:7", "1,5"] {
            assert_eq!(s.parse::<Targets>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn resolution() {
        let g = Graph::unweighted(6, &[(0, 1)], Matrix::zeros(6, 1)).unwrap();
        assert_eq!(
            Targets::All.resolve(&g, None, 0).unwrap(),
            (0..6).collect::<Vec<_>>()
        );
        assert!(Targets::Motif.resolve(&g, None, 0).is_err());
        assert!(Targets::List(vec![9]).resolve(&g, None, 0).is_err());
        assert_eq!(
            Targets::List(vec![4, 2, 4]).resolve(&g, None, 0).unwrap(),
            vec![2, 4]
        );
        let a = Targets::Sample(3).resolve(&g, None, 11).unwrap();
        assert_eq!(a, Targets::Sample(3).resolve(&g, None, 11).unwrap());
        assert_eq!(a.len(), 3);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(Targets::Sample(7).resolve(&g, None, 0).is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<usize> = (0..50).collect();
        let ys = par_map(3, &xs, |&x| Ok(x * 2)).unwrap();
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(2, &xs, |&x| if x == 7 { bail!("seven") } else { Ok(x) }).is_err());
    }
}
