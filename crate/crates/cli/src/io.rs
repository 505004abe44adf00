//! CSV input and output. Files are comma-separated UTF-8 with an optional
//! header, detected by a first row that does not parse as data.

use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use isspc_core::DataMatrix;

use crate::error::{CliError, CliResult};

/// Labels read from a file, with row ids when the file has two columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    pub row_ids: Option<Vec<String>>,
    pub labels: Vec<usize>,
}

fn reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn line_of(rec: &StringRecord, fallback: usize) -> u64 {
    rec.position().map_or(fallback as u64 + 1, |p| p.line())
}

fn parse_error(path: &Path, row: u64, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), row, message: message.into() }
}

fn read_error(path: &Path, err: csv::Error) -> CliError {
    let row = err.position().map_or(0, |p| p.line());
    parse_error(path, row, err.to_string())
}

/// Rust float parsing ignores the locale; non-finite spellings are refused.
fn parse_value(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads an observations-by-dimensions matrix. Rows are identified by their
/// 0-based position among the data rows.
pub fn read_matrix(path: &Path) -> CliResult<DataMatrix> {
    let mut rdr = reader(path)?;
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| read_error(path, e))?;
        let line = line_of(&rec, idx);
        if idx == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_error(path, line, format!("expected {w} fields, found {}", rec.len())));
            }
            Some(_) => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v = parse_value(field).ok_or_else(|| {
                parse_error(path, line, format!("field {} is not a finite number: {field:?}", j + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    let p = match width {
        Some(p) if n > 0 => p,
        _ => return Err(CliError::io(path, "no data rows")),
    };
    Ok(DataMatrix::new(values, n, p)?)
}

/// Reads `row_id,label` or single-column label files; 0 marks noise.
pub fn read_labels(path: &Path) -> CliResult<LabelFile> {
    let mut rdr = reader(path)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| read_error(path, e))?;
        let line = line_of(&rec, idx);
        let last = rec.get(rec.len().saturating_sub(1)).unwrap_or("");
        if idx == 0 && last.parse::<usize>().is_err() {
            continue;
        }
        if !(1..=2).contains(&rec.len()) {
            return Err(parse_error(path, line, format!("expected 1 or 2 fields, found {}", rec.len())));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_error(path, line, format!("expected {w} fields, found {}", rec.len())));
            }
            Some(_) => {}
        }
        let label = last
            .parse::<usize>()
            .map_err(|_| parse_error(path, line, format!("label is not a non-negative integer: {last:?}")))?;
        if rec.len() == 2 {
            ids.push(rec[0].to_string());
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(CliError::io(path, "no label rows"));
    }
    let row_ids = (width == Some(2)).then_some(ids);
    Ok(LabelFile { row_ids, labels })
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    WriterBuilder::new().from_path(path).map_err(|e| CliError::io(path, e))
}

/// Writes the matrix with an `x1,...,xp` header. Values use the shortest
/// representation that parses back to the same float.
pub fn write_matrix(path: &Path, y: &DataMatrix) -> CliResult<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = (1..=y.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    let mut fields = Vec::with_capacity(y.ncols());
    for row in y.rows() {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&fields).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `row_id,label` rows.
pub fn write_labels(path: &Path, row_ids: &[String], labels: &[usize]) -> CliResult<()> {
    if row_ids.len() != labels.len() {
        return Err(CliError::Internal(format!(
            "{} row ids for {} labels",
            row_ids.len(),
            labels.len()
        )));
    }
    let mut w = writer(path)?;
    w.write_record(["row_id", "label"]).map_err(|e| CliError::io(path, e))?;
    for (id, label) in row_ids.iter().zip(labels) {
        w.write_record([id.as_str(), &label.to_string()]).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
