//! LibSVM / SVMlight text format.
//!
//! ```text
//! +1 1:0.5 3:-2   # comment
//! -1 2:1
//! ```
//!
//! One row per line: a label followed by `index:value` pairs with 1-based,
//! strictly increasing indices. Anything after `#` is ignored, as are blank
//! lines.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub label: f64,
    /// `(index, value)` pairs, indices 1-based and strictly increasing.
    pub features: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LibsvmData {
    pub rows: Vec<SparseRow>,
    /// Largest feature index seen.
    pub dim: usize,
}

pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<LibsvmData> {
    parse_libsvm_reader(File::open(path)?)
}

pub fn parse_libsvm_str(text: &str) -> Result<LibsvmData> {
    parse_libsvm_reader(text.as_bytes())
}

pub fn parse_libsvm_reader(reader: impl Read) -> Result<LibsvmData> {
    let mut data = LibsvmData::default();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if let Some(row) = parse_line(&line).map_err(|msg| Error::Parse { line: lineno + 1, msg })? {
            if let Some(&(last, _)) = row.features.last() {
                data.dim = data.dim.max(last);
            }
            data.rows.push(row);
        }
    }
    Ok(data)
}

fn parse_line(line: &str) -> std::result::Result<Option<SparseRow>, String> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = content.split_ascii_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label: f64 = label_tok.parse().map_err(|_| format!("invalid label {label_tok:?}"))?;
    if !label.is_finite() {
        return Err(format!("label {label_tok:?} is not finite"));
    }
    let mut features: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| format!("feature {tok:?} is missing ':'"))?;
        let idx: usize = idx_s.parse().map_err(|_| format!("invalid feature index {idx_s:?}"))?;
        if idx == 0 {
            return Err("feature indices are 1-based".to_string());
        }
        let val: f64 = val_s.parse().map_err(|_| format!("invalid feature value {val_s:?}"))?;
        if !val.is_finite() {
            return Err(format!("feature value {val_s:?} is not finite"));
        }
        if let Some(&(prev, _)) = features.last() {
            if idx <= prev {
                return Err(format!("feature index {idx} does not increase (previous {prev})"));
            }
        }
        features.push((idx, val));
    }
    Ok(Some(SparseRow { label, features }))
}

/// Writes rows in the same format, values with 17 significant digits.
pub fn write_libsvm(rows: &[SparseRow], mut out: impl Write) -> Result<()> {
    for row in rows {
        write!(out, "{}", row.label)?;
        for &(idx, val) in &row.features {
            write!(out, " {idx}:{val:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
