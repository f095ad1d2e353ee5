//! Matrix files: comma-separated numbers, with an optional header row and an
//! optional leading label column, both detected automatically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mdlnmf_core::{validate_nonneg, DataMatrix};
use ndarray::Array2;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Swap rows and columns after reading.
    pub transpose: bool,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            transpose: false,
            delimiter: b',',
        }
    }
}

fn is_number(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

pub fn load_matrix(path: &Path, opts: &LoadOptions) -> Result<DataMatrix> {
    let file = File::open(path)
        .map_err(|e| HarnessError::io(format!("cannot open {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(opts.delimiter)
        .from_reader(file);

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            HarnessError::ParseError {
                path: path.to_path_buf(),
                line,
                reason: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 1);
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((line, fields));
    }
    parse_rows(path, rows, opts.transpose)
}

fn parse_rows(path: &Path, mut rows: Vec<(usize, Vec<String>)>, transpose: bool) -> Result<DataMatrix> {
    let parse_err = |line: usize, reason: String| HarnessError::ParseError {
        path: path.to_path_buf(),
        line,
        reason,
    };
    if rows.is_empty() {
        return Err(parse_err(1, "file contains no data".into()));
    }
    let header = if rows[0].1.iter().any(|f| !is_number(f)) && rows.len() > 1 {
        Some(rows.remove(0))
    } else {
        None
    };
    let has_label_col = !is_number(&rows[0].1[0]);
    let skip = usize::from(has_label_col);
    let width = rows[0].1.len();
    if width <= skip {
        return Err(parse_err(rows[0].0, "row holds no numeric fields".into()));
    }

    let n = width - skip;
    let m = rows.len();
    let mut values = Vec::with_capacity(m * n);
    let mut row_labels = Vec::with_capacity(m);
    for (line, fields) in &rows {
        if fields.len() != width {
            return Err(HarnessError::RaggedRows {
                path: path.to_path_buf(),
                line: *line,
                expected: width,
                found: fields.len(),
            });
        }
        if has_label_col {
            row_labels.push(fields[0].clone());
        }
        for (c, field) in fields.iter().enumerate().skip(skip) {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(*line, format!("column {}: `{field}` is not a number", c + 1)))?;
            if !value.is_finite() {
                return Err(parse_err(*line, format!("column {}: non-finite value", c + 1)));
            }
            if value < 0.0 {
                return Err(HarnessError::NegativeEntry {
                    path: path.to_path_buf(),
                    line: *line,
                    column: c + 1,
                    value,
                });
            }
            values.push(value);
        }
    }

    let col_labels = match header {
        Some((line, fields)) => {
            if fields.len() != width {
                return Err(HarnessError::RaggedRows {
                    path: path.to_path_buf(),
                    line,
                    expected: width,
                    found: fields.len(),
                });
            }
            Some(fields[skip..].to_vec())
        }
        None => None,
    };
    let array = Array2::from_shape_vec((m, n), values).expect("row widths checked");
    let matrix = validate_nonneg(array)?
        .with_labels(has_label_col.then_some(row_labels), col_labels)?;
    Ok(if transpose { matrix.transposed() } else { matrix })
}

/// Column names used when a matrix has none: `c1, c2, …`.
pub fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Write with a header row. Values carry 17 significant digits so that
/// reading the file back is bit-exact.
pub fn write_matrix(path: &Path, values: &Array2<f64>, col_labels: Option<&[String]>) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| HarnessError::io(format!("cannot create {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let labels = match col_labels {
        Some(l) if l.len() == values.ncols() => l.to_vec(),
        _ => default_labels("c", values.ncols()),
    };
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{}", labels.join(","))?;
        for row in values.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| HarnessError::io(format!("cannot write {}", path.display()), e))
}

/// Write a text file, mapping failures to an I/O error naming the path.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| HarnessError::io(format!("cannot write {}", path.display()), e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| HarnessError::io(format!("cannot create {}", path.display()), e))
}
