//! CSV persistence for labeled datasets.
//!
//! Format: UTF-8, `\n` newlines, header `f0,...,f{m-1},label`, decimal
//! floats (shortest round-trip form), integer labels. Load/save round-trips
//! reproduce every value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let m = ds.feature_dim();
    let mut out = String::new();
    for j in 0..m {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label\n");
    for (row, &label) in ds.features.rows().into_iter().zip(&ds.labels) {
        for v in row.iter() {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{label}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a dataset. When `num_classes` is given, labels are validated against
/// it; otherwise the class count is inferred as `max(label) + 1`.
pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| err(1, "empty file, expected header".into()))?;
    let fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if fields.last() != Some(&"label") {
        return Err(err(1, "malformed header: last column must be `label`".into()));
    }
    let m = fields.len() - 1;
    for (j, field) in fields[..m].iter().enumerate() {
        if *field != format!("f{j}") {
            return Err(err(
                1,
                format!("malformed header: expected column `f{j}`, found `{field}`"),
            ));
        }
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut max_label = 0usize;
    for (i, raw) in lines.enumerate() {
        let line_no = i + 2;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != m + 1 {
            return Err(err(
                line_no,
                format!("expected {} columns, found {}", m + 1, cells.len()),
            ));
        }
        for (j, cell) in cells[..m].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line_no, format!("non-numeric value `{cell}` in column f{j}")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite value `{cell}` in column f{j}")));
            }
            values.push(v);
        }
        let label: usize = cells[m]
            .parse()
            .map_err(|_| err(line_no, format!("non-integer label `{}`", cells[m])))?;
        if let Some(d) = num_classes {
            if label >= d {
                return Err(err(
                    line_no,
                    format!("label {label} out of range for {d} classes"),
                ));
            }
        }
        max_label = max_label.max(label);
        labels.push(label);
    }

    let n = labels.len();
    let d = num_classes.unwrap_or(if n == 0 { 0 } else { max_label + 1 });
    let features = Array2::from_shape_vec((n, m), values)
        .expect("row-major values match (n, m)");
    LabeledDataset::new(features, labels, d)
}
