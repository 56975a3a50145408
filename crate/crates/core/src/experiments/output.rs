//! CSV, JSON and gnuplot writers.
//!
//! CSV files are comma separated with a header row; numbers use Rust's
//! shortest round-trip formatting. Gnuplot files are whitespace separated
//! with `#` header comments and 17 significant digits.

use crate::error::{Error, Result};
use crate::solver::EnergyTrace;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Shortest representation that parses back to the same `f64`; non-finite
/// values become `nan`, `inf`, `-inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn trace_csv(trace: &EnergyTrace) -> String {
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|i| {
            [
                trace.times[i],
                trace.l2_sq[i],
                trace.grad_p[i],
                trace.flux_work[i],
                trace.source_work[i],
                trace.dissipation[i],
            ]
            .iter()
            .map(|&v| fmt_num(v))
            .collect()
        })
        .collect();
    csv_table(
        &["t", "l2_sq", "grad_p", "flux_work", "source_work", "dissipation"],
        &rows,
    )
}

/// Column-oriented data for [`emit_gnuplot_data`].
#[derive(Clone, Debug, PartialEq)]
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new(names: &[&str], data: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != data.len() || data.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::invalid("column names and equal-length columns required"));
        }
        Ok(Columns {
            names: names.iter().map(|s| s.to_string()).collect(),
            data,
        })
    }

    pub fn from_trace(trace: &EnergyTrace) -> Self {
        Columns {
            names: vec!["t".into(), "l2_sq".into(), "grad_p".into()],
            data: vec![trace.times.clone(), trace.l2_sq.clone(), trace.grad_p.clone()],
        }
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

pub fn emit_gnuplot_data(cols: &Columns) -> String {
    let mut s = format!("# {}\n", cols.names.join(" "));
    for i in 0..cols.rows() {
        let line: Vec<String> = cols.data.iter().map(|c| format!("{:.16e}", c[i])).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Parses output of [`emit_gnuplot_data`] (or any whitespace table with a
/// `# name name …` header).
pub fn parse_gnuplot_data(text: &str) -> Result<Columns> {
    let mut names: Option<Vec<String>> = None;
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            if names.is_none() {
                let n: Vec<String> = h.split_whitespace().map(str::to_string).collect();
                data = vec![Vec::new(); n.len()];
                names = Some(n);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if names.is_none() {
            data = vec![Vec::new(); fields.len()];
            names = Some((0..fields.len()).map(|i| format!("c{i}")).collect());
        }
        if fields.len() != data.len() {
            return Err(Error::config(
                format!("line {}", lineno + 1),
                format!("expected {} columns, found {}", data.len(), fields.len()),
            ));
        }
        for (c, f) in data.iter_mut().zip(fields) {
            let v = f
                .parse::<f64>()
                .map_err(|e| Error::config(format!("line {}", lineno + 1), e.to_string()))?;
            c.push(v);
        }
    }
    Ok(Columns {
        names: names.unwrap_or_default(),
        data,
    })
}

/// Reads a trace from gnuplot data or from the CSV written by [`trace_csv`]:
/// returns `(t, l2_sq)`.
pub fn read_trace_series(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let cols = if first.contains(',') {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .unwrap_or("")
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut data = vec![Vec::new(); header.len()];
        for (i, l) in lines.enumerate() {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != header.len() {
                return Err(Error::config(format!("row {}", i + 1), "column count mismatch"));
            }
            for (c, v) in data.iter_mut().zip(f) {
                c.push(v.trim().parse::<f64>().map_err(|e| Error::config(format!("row {}", i + 1), e.to_string()))?);
            }
        }
        Columns { names: header, data }
    } else {
        parse_gnuplot_data(text)?
    };
    let find = |n: &str| cols.names.iter().position(|c| c == n);
    let t = find("t").unwrap_or(0);
    let y = find("l2_sq").unwrap_or(1);
    if y >= cols.data.len() {
        return Err(Error::config("trace", "needs a time column and an l2_sq column"));
    }
    Ok((cols.data[t].clone(), cols.data[y].clone()))
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// One compact JSON object followed by a newline (a JSONL record).
pub fn to_json_line<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
