//! Run configuration: one TOML document with a section per stage.
//!
//! ```toml
//! seed = 0
//! workers = 1
//!
//! [dataset.ba_shapes]
//! features = { kind = "gaussian" }
//!
//! [train]
//! weighted_mean = true
//!
//! [perturb]
//! mode = "weaken"
//! factor = 0.3
//!
//! [explain]
//! k = 5
//! p_restart = 0.2
//!
//! [eval]
//! homogeneity_k = 20
//! ```
//!
//! Every key is optional. `--set section.key=value` edits the document before
//! it is validated; `--seed` and `--workers` win over both.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cfx_core::synth::{BaShapesParams, TreeMotifParams};
use cfx_core::{ExplainerConfig, PerturbMode, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub perturb: PerturbMode,
    pub explain: ExplainerConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            perturb: PerturbMode::Remove,
            explain: ExplainerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub ba_shapes: BaShapesParams,
    pub tree_cycles: TreeMotifParams,
    pub tree_grid: TreeMotifParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            ba_shapes: BaShapesParams::default(),
            tree_cycles: TreeMotifParams::cycles(),
            tree_grid: TreeMotifParams::grids(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Held-out edge share for the link-prediction check.
    pub test_fraction: f64,
    /// `k` of Hit@k.
    pub hit_k: usize,
    /// Neighbors inspected by the homogeneity probe.
    pub homogeneity_k: usize,
    /// k-means clusters; defaults to the label count, else 8.
    pub clusters: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.1,
            hit_k: 5,
            homogeneity_k: 20,
            clusters: None,
        }
    }
}

fn set_path(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("`--set {assignment}` is not of the form section.key=value"))?;
    // bare words are strings; everything else is parsed as a TOML value
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for s in sections {
        cur = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("`{s}` in `--set {assignment}` is not a section"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_table(toml::from_str(text)?, &[])
    }

    pub fn from_table(mut table: toml::Table, sets: &[String]) -> Result<Self> {
        for s in sets {
            set_path(&mut table, s)?;
        }
        let cfg: Config = table
            .try_into()
            .context("config does not match the documented schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (when given), applies `--set` edits, then flag overrides.
    pub fn load(
        path: Option<&Path>,
        sets: &[String],
        seed: Option<u64>,
        workers: Option<usize>,
    ) -> Result<Self> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("{} is not valid TOML", p.display()))?
            }
            None => toml::Table::new(),
        };
        let mut cfg = Self::from_table(table, sets)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(w) = workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        self.train.validate()?;
        self.explain.validate()?;
        if let PerturbMode::Weaken { factor } = self.perturb {
            if !(0.0..=1.0).contains(&factor) {
                bail!("perturb.factor must lie in [0, 1]");
            }
        }
        if !(0.0..1.0).contains(&self.eval.test_fraction) {
            bail!("eval.test_fraction must lie in [0, 1)");
        }
        if self.eval.hit_k == 0 || self.eval.homogeneity_k == 0 {
            bail!("eval.hit_k and eval.homogeneity_k must be positive");
        }
        Ok(())
    }

    /// Explainer settings with the run seed folded in.
    pub fn explainer(&self) -> ExplainerConfig {
        ExplainerConfig {
            seed: self.explain.seed ^ self.seed,
            ..self.explain.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfx_core::FeatureKind;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn sections_and_overrides() {
        let text = r#"
            seed = 3
            [dataset.ba_shapes]
            features = { kind = "gaussian" }
            [perturb]
            mode = "weaken"
            factor = 0.3
            [explain]
            k = 7
        "#;
        let table: toml::Table = toml::from_str(text).unwrap();
        let cfg = Config::from_table(
            table,
            &[
                "explain.p_restart=0.5".into(),
                "train.activation=tanh".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.explain.k, 7);
        assert_eq!(cfg.explain.p_restart, 0.5);
        assert_eq!(cfg.perturb, PerturbMode::Weaken { factor: 0.3 });
        assert_eq!(cfg.dataset.ba_shapes.features, FeatureKind::Gaussian);
        assert_eq!(cfg.train.activation, cfx_core::Activation::Tanh);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_toml("[explain]\nkay = 5").is_err());
        assert!(Config::from_toml("[explain]\np_restart = 2.0").is_err());
        assert!(Config::from_toml("workers = 0").is_err());
        assert!(Config::from_table(toml::Table::new(), &["explain".into()]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config {
            perturb: PerturbMode::Weaken { factor: 0.25 },
            eval: EvalConfig {
                clusters: Some(4),
                ..Default::default()
            },
            ..Default::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    }
}
