//! Output helpers: fixed-precision formatting and atomic file writes.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// Every float written by the CLI goes through one of these two helpers so
/// repeated runs are byte-identical.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn matrix_csv(ids: &[String], values: &Array2<f64>) -> String {
    let mut out = String::new();
    out.push_str("dataset_id");
    for id in ids {
        out.push(',');
        out.push_str(&csv_field(id));
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(values.rows()) {
        out.push_str(&csv_field(id));
        for v in row {
            out.push(',');
            out.push_str(&fmt6(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    dataset_ids: &'a [String],
    values: Vec<Vec<f64>>,
}

pub fn matrix_json(ids: &[String], values: &Array2<f64>) -> Result<String> {
    let m = MatrixJson {
        dataset_ids: ids,
        values: values
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().map(round6).collect())
            .collect(),
    };
    to_json(&m)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Like [`to_json`], with every float rounded to six decimals.
pub fn to_json_rounded<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Serialize(e.to_string()))?;
    round_floats(&mut v);
    to_json(&v)
}

fn round_floats(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round6(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// RFC 4180 quoting for a single field.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes through a temp file in the destination directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
