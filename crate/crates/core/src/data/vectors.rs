//! Generic labeled-vector CSV: one sample per row, `label,v1,...,vd`.
//!
//! An optional header row whose first cell is `label` is skipped. Every row
//! must carry the same `d`. Values are taken as-is (no rescaling), so
//! externally prepared feature dumps (CIFAR-10, GTSRB, Tiny-ImageNet) can be
//! fed through the pipeline.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn import_labeled_vectors(path: &Path, split: Split) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut dim = None;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if labels.is_empty() && dim.is_none() && record.get(0) == Some("label") {
            continue;
        }
        if record.len() < 2 {
            return Err(parse_err(line, "expected a label and at least one value".into()));
        }
        let d = record.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(
                    line,
                    format!("row has {d} values, earlier rows have {expected}"),
                ))
            }
            _ => {}
        }
        let label: u32 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("label `{}` is not a non-negative integer", &record[0])))?;
        labels.push(label);
        for (col, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: `{cell}` is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
    }
    let d = dim.ok_or_else(|| Error::Data(format!("{} contains no rows", path.display())))?;
    let n = labels.len();
    LabeledDataset::new(Tensor::new(vec![n, d], values)?, labels, split)
}

/// Writes samples flattened to `label,v1,...,vd` rows with a header.
pub fn export_labeled_vectors(ds: &LabeledDataset, path: &Path) -> Result<()> {
    crate::io::ensure_parent(path)?;
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let d = ds.samples().row_len();
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((1..=d).map(|i| format!("v{i}")))
        .collect();
    let mut text = header.join(",");
    text.push('\n');
    for (i, label) in ds.labels().iter().enumerate() {
        text.push_str(&label.to_string());
        for v in ds.samples().row(i) {
            text.push(',');
            // Display prints the shortest string that parses back to the same f64.
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
