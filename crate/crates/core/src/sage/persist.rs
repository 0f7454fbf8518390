//! Text weight files:
//!
//! ```text
//! cfx-sage 1
//! activation relu
//! weighted_mean false
//! layers 2
//! layer 10 64
//! <10 rows of M_self>
//! <10 rows of M_agg>
//! layer 64 64
//! ...
//! ```
//!
//! Floats use shortest round-trip formatting, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, SageLayer, SageModel};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg::Matrix;

const MAGIC: &str = "cfx-sage";
const VERSION: u32 = 1;

pub(crate) fn format_model(model: &SageModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "activation {}", model.activation().name());
    let _ = writeln!(s, "weighted_mean {}", model.weighted_mean());
    let _ = writeln!(s, "layers {}", model.layers().len());
    for l in model.layers() {
        let _ = writeln!(s, "layer {} {}", l.in_dim(), l.out_dim());
        for m in [&l.m_self, &l.m_agg] {
            for i in 0..m.rows() {
                for (j, x) in m.row(i).iter().enumerate() {
                    if j > 0 {
                        s.push(' ');
                    }
                    let _ = write!(s, "{x}");
                }
                s.push('\n');
            }
        }
    }
    s
}

fn corrupt(line: usize, msg: String) -> Error {
    Error::CorruptModel(format!("line {}: {msg}", line + 1))
}

fn next<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    what: &str,
) -> Result<(usize, &'a str)> {
    lines
        .next()
        .ok_or_else(|| Error::CorruptModel(format!("file ends before {what}")))
}

fn field<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, String)> {
    let (i, l) = next(lines, key)?;
    match l.split_once(' ') {
        Some((k, v)) if k == key => Ok((i, v.trim().to_string())),
        _ => Err(corrupt(i, format!("expected `{key} ...`"))),
    }
}

pub(crate) fn parse_model(text: &str) -> Result<SageModel> {
    let mut lines = text.lines().enumerate();
    let (i, header) = next(&mut lines, "the header")?;
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [MAGIC, v] if *v == VERSION.to_string() => {}
        [MAGIC, v] => return Err(corrupt(i, format!("unsupported version {v}"))),
        _ => return Err(corrupt(i, "not a cfx-sage weight file".into())),
    }
    let (i, act) = field(&mut lines, "activation")?;
    let activation = Activation::from_name(&act)
        .ok_or_else(|| corrupt(i, format!("unknown activation `{act}`")))?;
    let (i, w) = field(&mut lines, "weighted_mean")?;
    let weighted: bool = w
        .parse()
        .map_err(|_| corrupt(i, format!("bad flag `{w}`")))?;
    let (i, n) = field(&mut lines, "layers")?;
    let n_layers: usize = n
        .parse()
        .map_err(|_| corrupt(i, format!("bad layer count `{n}`")))?;

    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (i, dims) = field(&mut lines, "layer")?;
        let parsed: Vec<usize> = dims
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect();
        let &[d_in, d_out] = parsed.as_slice() else {
            return Err(corrupt(i, format!("bad layer dims `{dims}`")));
        };
        let mut mats = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut data = Vec::with_capacity(d_in * d_out);
            for _ in 0..d_in {
                let (i, row) = next(&mut lines, "a weight row")?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    data.push(
                        tok.parse::<f64>()
                            .map_err(|_| corrupt(i, format!("bad number `{tok}`")))?,
                    );
                }
                if data.len() - before != d_out {
                    return Err(corrupt(
                        i,
                        format!("expected {d_out} values, found {}", data.len() - before),
                    ));
                }
            }
            mats.push(Matrix::from_vec(d_in, d_out, data)?);
        }
        let m_agg = mats.pop().expect("two matrices");
        let m_self = mats.pop().expect("two matrices");
        layers.push(SageLayer::new(m_self, m_agg)?);
    }
    if let Some((i, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(corrupt(i, format!("trailing content `{extra}`")));
    }
    let model =
        SageModel::new(layers, activation).map_err(|e| Error::CorruptModel(e.to_string()))?;
    Ok(model.with_weighted_mean(weighted))
}

pub fn save_model(model: &SageModel, path: &Path) -> Result<()> {
    io::write_string(path, &format_model(model))
}

pub fn load_model(path: &Path) -> Result<SageModel> {
    parse_model(&io::read_to_string(path)?)
}
