//! Aggregated tables and plots from a finished semi-synthetic run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::io::{create_dir, write_text};
use crate::semisynth::{median, SCATTER_HEADER};
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub method: String,
    pub variant: String,
    pub noise_sigma: f64,
    pub r_gen: usize,
    pub r_fit: usize,
    pub seed: u64,
    pub true_error: f64,
    pub noise_error: f64,
    pub final_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub runs: usize,
    pub fraction_below_diagonal: f64,
    pub per_method: BTreeMap<String, f64>,
}

fn read_to_string(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(HarnessError::MissingInput(path.display().to_string()))
        }
        Err(e) => Err(HarnessError::io(format!("cannot read {}", path.display()), e)),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: Option<&str>) -> Result<T> {
    raw.and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| HarnessError::ParseError {
            path: path.to_path_buf(),
            line,
            reason: format!("bad or missing `{name}`"),
        })
}

pub fn read_scatter(path: &Path) -> Result<Vec<ScatterRow>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == SCATTER_HEADER => {}
        Some((i, _)) => {
            return Err(HarnessError::ParseError {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected header `{SCATTER_HEADER}`"),
            })
        }
        None => return Err(HarnessError::MissingInput(format!("{} is empty", path.display()))),
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 9 {
            return Err(HarnessError::RaggedRows {
                path: path.to_path_buf(),
                line,
                expected: 9,
                found: f.len(),
            });
        }
        let get = |k: usize| f.get(k).copied();
        rows.push(ScatterRow {
            method: f[0].to_string(),
            variant: f[1].to_string(),
            noise_sigma: field(path, line, "noise_sigma", get(2))?,
            r_gen: field(path, line, "r_gen", get(3))?,
            r_fit: field(path, line, "r_fit", get(4))?,
            seed: field(path, line, "seed", get(5))?,
            true_error: field(path, line, "true_error", get(6))?,
            noise_error: field(path, line, "noise_error", get(7))?,
            final_bits: field(path, line, "final_bits", get(8))?,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::MissingInput(format!(
            "{} has a header but no runs",
            path.display()
        )));
    }
    Ok(rows)
}

fn fraction_below(rows: &[&ScatterRow]) -> f64 {
    let below = rows.iter().filter(|r| r.true_error < r.noise_error).count();
    below as f64 / rows.len() as f64
}

/// Normalized trace file: header of series names, then one row per step.
fn read_trace(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| HarnessError::MissingInput(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| HarnessError::ParseError {
                path: path.to_path_buf(),
                line: i + 2,
                reason: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Curve plot with one polyline per series, one point per trace row.
pub fn curve_plot(title: &str, header: &[String], rows: &[Vec<f64>]) -> Plot {
    let series = header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(c, name)| Series {
            name: name.clone(),
            points: rows.iter().map(|r| (r[0], r[c])).collect(),
            style: Style::Line,
        })
        .collect();
    Plot {
        title: title.to_string(),
        x_label: "iteration".into(),
        y_label: "normalized value".into(),
        series,
        diagonal: false,
    }
}

/// Read `input/scatter.csv` (and `input/traces/` if present) and write
/// aggregated tables, SVG plots and `report_summary.txt` into `out`.
pub fn run_report(input: &Path, out: &Path) -> Result<ReportSummary> {
    let rows = read_scatter(&input.join("scatter.csv"))?;
    create_dir(out)?;

    let mut by_method: BTreeMap<&str, Vec<&ScatterRow>> = BTreeMap::new();
    for r in &rows {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }

    for (method, rs) in &by_method {
        let plot = Plot {
            title: format!("{method}: true error against noise error"),
            x_label: "noise error".into(),
            y_label: "true error".into(),
            series: vec![Series {
                name: method.to_string(),
                points: rs.iter().map(|r| (r.noise_error, r.true_error)).collect(),
                style: Style::Points,
            }],
            diagonal: true,
        };
        write_text(&out.join(format!("scatter_{method}.svg")), &plot.render())?;
    }

    let mut groups: BTreeMap<(String, String, u64), Vec<&ScatterRow>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.method.clone(), r.variant.clone(), r.noise_sigma.to_bits()))
            .or_default()
            .push(r);
    }
    let mut table = String::from(
        "method,variant,noise_sigma,runs,median_true_error,mean_true_error,median_noise_error,fraction_below_diagonal\n",
    );
    let mut keys: Vec<_> = groups.keys().cloned().collect();
    keys.sort_by(|a, b| {
        (a.0.as_str(), a.1.as_str())
            .cmp(&(b.0.as_str(), b.1.as_str()))
            .then(f64::from_bits(a.2).total_cmp(&f64::from_bits(b.2)))
    });
    for key in &keys {
        let rs = &groups[key];
        let te: Vec<f64> = rs.iter().map(|r| r.true_error).collect();
        let ne: Vec<f64> = rs.iter().map(|r| r.noise_error).collect();
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            key.0,
            key.1,
            f64::from_bits(key.2),
            rs.len(),
            median(&te),
            te.iter().sum::<f64>() / te.len() as f64,
            median(&ne),
            fraction_below(rs)
        );
    }
    write_text(&out.join("true_error_by_noise.csv"), &table)?;

    let mut level_series = Vec::new();
    for (method, rs) in &by_method {
        let mut levels: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in rs {
            levels.entry(r.noise_sigma.to_bits()).or_default().push(r.true_error);
        }
        let mut points: Vec<(f64, f64)> = levels
            .into_iter()
            .map(|(k, v)| (f64::from_bits(k), median(&v)))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        level_series.push(Series {
            name: method.to_string(),
            points,
            style: Style::Line,
        });
    }
    let level_plot = Plot {
        title: "median true error against noise level".into(),
        x_label: "noise level".into(),
        y_label: "median true error".into(),
        series: level_series,
        diagonal: false,
    };
    write_text(&out.join("true_error_by_noise.svg"), &level_plot.render())?;

    let traces = input.join("traces");
    let mut curves = 0usize;
    if traces.is_dir() {
        let curve_dir = out.join("curves");
        create_dir(&curve_dir)?;
        let mut entries: Vec<_> = fs::read_dir(&traces)
            .map_err(|e| HarnessError::io(format!("cannot list {}", traces.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for path in entries {
            let (header, trace_rows) = read_trace(&path)?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let plot = curve_plot(&stem, &header, &trace_rows);
            write_text(&curve_dir.join(format!("{stem}.svg")), &plot.render())?;
            curves += 1;
        }
    }

    let all: Vec<&ScatterRow> = rows.iter().collect();
    let summary = ReportSummary {
        runs: rows.len(),
        fraction_below_diagonal: fraction_below(&all),
        per_method: by_method
            .iter()
            .map(|(m, rs)| (m.to_string(), fraction_below(rs)))
            .collect(),
    };
    let mut text = format!(
        "runs={}\nfraction_below_diagonal={}\ncurves={curves}\n",
        summary.runs, summary.fraction_below_diagonal
    );
    for (m, f) in &summary.per_method {
        let _ = writeln!(text, "fraction_below_diagonal.{m}={f}");
    }
    write_text(&out.join("report_summary.txt"), &text)?;
    Ok(summary)
}
