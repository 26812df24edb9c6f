//! CSV and JSON emission. Floats are written with `{}`, which round-trips
//! exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::run::AggregateResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t,e1,e1_stderr,e2,e2_stderr";

pub fn csv_string(res: &AggregateResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in 0..res.e1.len() {
        let _ = writeln!(
            out,
            "{t},{},{},{},{}",
            res.e1[t], res.e1_stderr[t], res.e2[t], res.e2_stderr[t]
        );
    }
    out
}

/// CSV plus reference curves `r1 = e1(0)·θ₁^t` and `r2 = e1(0)·θ₂^t` when
/// bounds were computed.
pub fn plot_data_string(res: &AggregateResult) -> String {
    let Some(b) = res.bounds else {
        return csv_string(res);
    };
    let e10 = res.e1[0];
    let mut out = format!("{CSV_HEADER},r1,r2\n");
    for t in 0..res.e1.len() {
        let (r1, r2) = if t == 0 {
            (e10, e10)
        } else {
            (e10 * b.theta1.powi(t as i32), e10 * b.theta2.powi(t as i32))
        };
        let _ = writeln!(
            out,
            "{t},{},{},{},{},{r1},{r2}",
            res.e1[t], res.e1_stderr[t], res.e2[t], res.e2_stderr[t]
        );
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(res: &AggregateResult, path: &Path) -> Result<()> {
    write(path, &csv_string(res))
}

pub fn emit_plot_data(res: &AggregateResult, path: &Path) -> Result<()> {
    write(path, &plot_data_string(res))
}

pub fn emit_summary(res: &AggregateResult, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(res)
        .map_err(|e| Error::InvalidInput(format!("summary serialisation: {e}")))?;
    write(path, &text)
}

/// Columns of a CSV written by [`emit_csv`] or [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvColumns {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvColumns {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }
}

pub fn parse_csv(text: &str) -> Result<CsvColumns> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            msg: "empty CSV".into(),
        });
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut columns = vec![Vec::new(); names.len()];
    for (no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: no + 1,
                msg: format!("{} fields, header has {}", fields.len(), names.len()),
            });
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: no + 1,
                msg: format!("bad number {f:?}"),
            })?);
        }
    }
    Ok(CsvColumns { names, columns })
}

pub fn read_csv(path: &Path) -> Result<CsvColumns> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
