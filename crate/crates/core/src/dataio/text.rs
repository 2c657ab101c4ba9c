//! Plain-text feature dumps and score files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

/// `n_filters T'` header, then one line of whitespace-separated values per filter.
pub fn format_features(values: &Array2<f64>) -> String {
    let mut out = format!("{} {}\n", values.nrows(), values.ncols());
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_features(text: &str, path: &Path) -> Result<Array2<f64>> {
    let malformed = |reason: String| Error::MalformedLine {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    let mut tokens = text.split_whitespace();
    let mut dim = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed("missing `n_filters T'` header".into()))
    };
    let (rows, cols) = (dim()?, dim()?);
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| malformed(format!("bad value `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|_| malformed(format!("expected {} values", rows * cols)))
}

pub fn write_features(path: impl AsRef<Path>, values: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_features(values)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, path)
}

/// `utterance_id score` lines.
pub fn format_scores(scores: &[(String, f64)]) -> String {
    let mut out = String::new();
    for (id, s) in scores {
        writeln!(out, "{id} {s}").expect("writing to a String");
    }
    out
}

pub fn parse_scores(text: &str, path: &Path) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let &[id, score] = fields.as_slice() else {
            return Err(malformed(format!(
                "expected 2 fields, found {}",
                fields.len()
            )));
        };
        let score = score
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite())
            .ok_or_else(|| malformed(format!("bad score `{score}`")))?;
        out.push((id.to_string(), score));
    }
    Ok(out)
}

pub fn write_scores(path: impl AsRef<Path>, scores: &[(String, f64)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_scores(scores)).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text, path)
}
