//! Explanation records, one JSON object per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Explanation, NodeId};
use crate::io::{read_to_string, write_string};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub target: NodeId,
    pub method: String,
    pub edges: Vec<(NodeId, NodeId)>,
    pub importance: f64,
    pub size: usize,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub inexplicable: bool,
}

impl ExplanationRecord {
    pub fn new(method: &str, expl: &Explanation, importance: f64) -> Self {
        Self {
            target: expl.target,
            method: method.to_string(),
            edges: expl.edges.iter().map(|e| (e.u(), e.v())).collect(),
            importance,
            size: expl.size(),
            iterations: 0,
            inexplicable: false,
        }
    }

    pub fn explanation(&self) -> Explanation {
        Explanation::from_edges(
            self.target,
            self.edges.iter().map(|&(u, v)| Edge::new(u, v)),
        )
        .with_importance(self.importance)
    }
}

pub fn format_records(records: &[ExplanationRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn parse_records(path: &Path, text: &str) -> Result<Vec<ExplanationRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

pub fn write_records(path: &Path, records: &[ExplanationRecord]) -> Result<()> {
    write_string(path, &format_records(records)?)
}

pub fn read_records(path: &Path) -> Result<Vec<ExplanationRecord>> {
    parse_records(path, &read_to_string(path)?)
}
