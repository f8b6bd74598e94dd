//! Plain-text checkpoints.
//!
//! ```text
//! # vector-field-model activation=tanh layers=<n>
//! layer <i> <rows> <cols>
//! <rows lines of cols weights>
//! <one line of rows biases>
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` bit pattern.

use std::fmt::Write as _;
use std::path::Path;

use super::model::{Activation, Dense, VectorFieldModel};
use crate::error::{Error, Result};

const MAGIC: &str = "# vector-field-model";

pub fn serialize_checkpoint(model: &VectorFieldModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MAGIC} activation={} layers={}",
        model.activation.id(),
        model.layers.len()
    );
    for (i, l) in model.layers.iter().enumerate() {
        let _ = writeln!(out, "layer {i} {} {}", l.rows, l.cols);
        for row in l.weight.chunks_exact(l.cols) {
            write_values(&mut out, row);
        }
        write_values(&mut out, &l.bias);
    }
    out
}

fn write_values(out: &mut String, values: &[f64]) {
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

pub fn parse_checkpoint(text: &str) -> Result<VectorFieldModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (n, header) = lines.next().ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::parse(n, "missing checkpoint header"))?;
    let mut activation = None;
    let mut n_layers = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("activation", v)) => activation = Activation::from_id(v),
            Some(("layers", v)) => n_layers = v.parse::<usize>().ok(),
            _ => return Err(Error::parse(n, format!("unexpected header field `{field}`"))),
        }
    }
    let activation = activation.ok_or_else(|| Error::parse(n, "unknown or missing activation"))?;
    let n_layers = n_layers.ok_or_else(|| Error::parse(n, "missing layer count"))?;

    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(n, format!("missing layer {i}")))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (rows, cols) = match parts.as_slice() {
            ["layer", idx, rows, cols] if idx.parse::<usize>().ok() == Some(i) => {
                let rows = rows.parse().map_err(|_| Error::parse(n, "bad row count"))?;
                let cols = cols.parse().map_err(|_| Error::parse(n, "bad column count"))?;
                (rows, cols)
            }
            _ => return Err(Error::parse(n, format!("expected `layer {i} <rows> <cols>`"))),
        };
        let mut layer = Dense::zeros(rows, cols);
        for r in 0..rows {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(n, "truncated weights"))?;
            let row = parse_values(n, line, cols)?;
            layer.weight[r * cols..(r + 1) * cols].copy_from_slice(&row);
        }
        let (n, line) = lines.next().ok_or_else(|| Error::parse(n, "missing biases"))?;
        layer.bias = parse_values(n, line, rows)?;
        layers.push(layer);
    }
    if let Some((n, line)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::parse(n, format!("trailing content `{line}`")));
    }
    VectorFieldModel::from_layers(layers, activation)
}

fn parse_values(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("bad number `{tok}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            line_no,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

pub fn save_checkpoint(model: &VectorFieldModel, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<VectorFieldModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
