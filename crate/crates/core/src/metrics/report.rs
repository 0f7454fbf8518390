use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

/// Method name used for the unperturbed reference rows.
pub const INPUT_GRAPH: &str = "input_graph";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub target: NodeId,
    pub method: String,
    pub importance: f64,
    pub size: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub valid: bool,
    pub pn: Option<bool>,
    pub homogeneity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub targets: usize,
    pub mean_importance: f64,
    pub mean_size: f64,
    pub validity: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub pn: Option<f64>,
    pub homogeneity: Option<f64>,
    /// Drop in mean homogeneity against the input-graph rows.
    pub delta_homogeneity: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub config: serde_json::Value,
}

fn mean_of<I: Iterator<Item = f64>>(it: I) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn opt<T: std::fmt::Display>(x: &Option<T>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            rows: Vec::new(),
            config,
        }
    }

    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    /// Rows ordered by method then target.
    pub fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| a.method.cmp(&b.method).then(a.target.cmp(&b.target)));
    }

    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self, method: &str) -> Option<MethodSummary> {
        let rows: Vec<&MetricRow> = self.rows_for(method).collect();
        if rows.is_empty() {
            return None;
        }
        let homogeneity = mean_of(rows.iter().filter_map(|r| r.homogeneity));
        let base = mean_of(self.rows_for(INPUT_GRAPH).filter_map(|r| r.homogeneity));
        Some(MethodSummary {
            method: method.to_string(),
            targets: rows.len(),
            mean_importance: mean_of(rows.iter().map(|r| r.importance)).unwrap_or(0.0),
            mean_size: mean_of(rows.iter().map(|r| r.size as f64)).unwrap_or(0.0),
            validity: mean_of(rows.iter().map(|r| r.valid as u8 as f64)).unwrap_or(0.0),
            precision: mean_of(rows.iter().filter_map(|r| r.precision)),
            recall: mean_of(rows.iter().filter_map(|r| r.recall)),
            pn: mean_of(rows.iter().filter_map(|r| r.pn.map(|b| b as u8 as f64))),
            homogeneity,
            delta_homogeneity: match (base, homogeneity) {
                (Some(b), Some(h)) if method != INPUT_GRAPH => Some(b - h),
                _ => None,
            },
        })
    }

    pub fn summaries(&self) -> Vec<MethodSummary> {
        self.methods()
            .iter()
            .filter_map(|m| self.summary(m))
            .collect()
    }

    pub fn rows_csv(&self) -> String {
        let mut s =
            String::from("target,method,importance,size,precision,recall,valid,pn,homogeneity\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.target,
                r.method,
                r.importance,
                r.size,
                opt(&r.precision),
                opt(&r.recall),
                r.valid,
                opt(&r.pn),
                opt(&r.homogeneity)
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "method,targets,mean_importance,mean_size,validity,precision,recall,pn,homogeneity,delta_homogeneity\n",
        );
        for m in self.summaries() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                m.method,
                m.targets,
                m.mean_importance,
                m.mean_size,
                m.validity,
                opt(&m.precision),
                opt(&m.recall),
                opt(&m.pn),
                opt(&m.homogeneity),
                opt(&m.delta_homogeneity)
            );
        }
        s
    }

    /// Rows, summaries and the config snapshot as one JSON document.
    pub fn to_json(&self) -> serde_json::Value {
        let summaries: BTreeMap<String, MethodSummary> = self
            .summaries()
            .into_iter()
            .map(|m| (m.method.clone(), m))
            .collect();
        serde_json::json!({
            "config": self.config,
            "summary": summaries,
            "rows": self.rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(target: NodeId, method: &str, importance: f64, homogeneity: Option<f64>) -> MetricRow {
        MetricRow {
            target,
            method: method.into(),
            importance,
            size: 2,
            precision: None,
            recall: None,
            valid: importance == 1.0,
            pn: None,
            homogeneity,
        }
    }

    #[test]
    fn summary_and_delta() {
        let mut r = MetricsReport::default();
        r.push(row(0, "unr", 1.0, Some(0.2)));
        r.push(row(1, "unr", 0.6, Some(0.4)));
        r.push(row(0, INPUT_GRAPH, 0.0, Some(0.9)));
        r.push(row(1, INPUT_GRAPH, 0.0, Some(0.7)));
        let s = r.summary("unr").unwrap();
        assert_eq!(s.targets, 2);
        assert_eq!(s.mean_importance, 0.8);
        assert_eq!(s.validity, 0.5);
        assert!((s.delta_homogeneity.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.summary(INPUT_GRAPH).unwrap().delta_homogeneity, None);
        assert!(r.summary("missing").is_none());
    }

    #[test]
    fn csv_has_a_line_per_row() {
        let mut r = MetricsReport::default();
        r.push(row(3, "1hop-2n", 0.4, None));
        let csv = r.rows_csv();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap(), "3,1hop-2n,0.4,2,,,false,,");
        assert_eq!(r.summary_csv().lines().count(), 2);
    }
}
