//! Plain-text graph formats.
//!
//! * edge list: one `u v [w]` per line, whitespace separated, weight defaults to 1
//! * features: CSV, row `i` holds node `i`; a non-numeric first line is a header
//! * labels: CSV `node,class`
//!
//! Lines that are empty or start with `#` are ignored by every reader.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::linalg::Matrix;

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Raw `(u, v, w)` token triples; ids are kept as strings so callers can densify.
pub fn parse_edge_tokens(path: &Path, text: &str) -> Result<Vec<(usize, String, String, f64)>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let mut parts = l.split_whitespace();
        let (Some(u), Some(v)) = (parts.next(), parts.next()) else {
            return Err(Error::parse(path, line, "expected `u v [w]`"));
        };
        let w = match parts.next() {
            Some(tok) => tok
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad weight `{tok}`")))?,
            None => 1.0,
        };
        if parts.next().is_some() {
            return Err(Error::parse(path, line, "too many fields"));
        }
        out.push((line, u.to_string(), v.to_string(), w));
    }
    Ok(out)
}

pub fn read_edge_list(path: &Path, num_nodes: usize) -> Result<Vec<(NodeId, NodeId, f64)>> {
    let text = read_to_string(path)?;
    parse_edge_tokens(path, &text)?
        .into_iter()
        .map(|(line, u, v, w)| {
            let parse = |tok: &str| {
                tok.parse::<NodeId>()
                    .map_err(|_| Error::parse(path, line, format!("bad node id `{tok}`")))
                    .and_then(|n| {
                        if n < num_nodes {
                            Ok(n)
                        } else {
                            Err(Error::parse(
                                path,
                                line,
                                format!("node {n} >= node count {num_nodes}"),
                            ))
                        }
                    })
            };
            Ok((parse(&u)?, parse(&v)?, w))
        })
        .collect()
}

pub fn format_edge_list(g: &Graph) -> String {
    let mut s = String::new();
    for (e, w) in g.weighted_edges() {
        let _ = writeln!(s, "{} {} {}", e.u(), e.v(), w);
    }
    s
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    write_string(path, &format_edge_list(g))
}

/// Parses a numeric CSV matrix, skipping a header line when its first field
/// is not a number.
pub fn parse_matrix_csv(path: &Path, text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, (line, l)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            continue;
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("bad number `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(path, &read_to_string(path)?)
}

pub fn format_matrix_csv(m: &Matrix) -> String {
    let mut s = String::with_capacity(m.rows() * m.cols() * 8);
    for i in 0..m.rows() {
        for (j, x) in m.row(i).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{x}");
        }
        s.push('\n');
    }
    s
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    write_string(path, &format_matrix_csv(m))
}

/// `node,class` pairs as raw strings, header skipped when the class column of
/// the first line is literally `class` or `label`.
pub fn parse_label_tokens(path: &Path, text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, (line, l)) in content_lines(text).enumerate() {
        let mut parts = l.split(',').map(str::trim);
        let (Some(node), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, line, "expected `node,class`"));
        };
        if idx == 0 && matches!(class, "class" | "label") {
            continue;
        }
        out.push((line, node.to_string(), class.to_string()));
    }
    Ok(out)
}

pub fn read_labels_csv(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    let text = read_to_string(path)?;
    let mut labels = vec![None; num_nodes];
    for (line, node, class) in parse_label_tokens(path, &text)? {
        let n: NodeId = node
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad node id `{node}`")))?;
        let c: usize = class
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad class `{class}`")))?;
        if n >= num_nodes {
            return Err(Error::parse(
                path,
                line,
                format!("node {n} >= node count {num_nodes}"),
            ));
        }
        labels[n] = Some(c);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(n, l)| l.ok_or_else(|| Error::parse(path, 0, format!("node {n} has no label"))))
        .collect()
}

pub fn format_labels_csv(labels: &[usize]) -> String {
    let mut s = String::from("node,class\n");
    for (n, c) in labels.iter().enumerate() {
        let _ = writeln!(s, "{n},{c}");
    }
    s
}

/// Writes `edges.txt`, `features.csv` and (when present) `labels.csv` into `dir`.
pub fn write_graph_dir(dir: &Path, g: &Graph) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_edge_list(&dir.join("edges.txt"), g)?;
    write_matrix_csv(&dir.join("features.csv"), g.features())?;
    if let Some(labels) = g.labels() {
        write_string(&dir.join("labels.csv"), &format_labels_csv(labels))?;
    }
    Ok(())
}

/// Reads a directory written by [`write_graph_dir`].
pub fn read_graph_dir(dir: &Path) -> Result<Graph> {
    let features = read_matrix_csv(&dir.join("features.csv"))?;
    let n = features.rows();
    let edges = read_edge_list(&dir.join("edges.txt"), n)?;
    let g = Graph::new(n, edges, features)?;
    let labels_path = dir.join("labels.csv");
    if labels_path.exists() {
        g.with_labels(read_labels_csv(&labels_path, n)?)
    } else {
        Ok(g)
    }
}
