//! Text interchange formats: numeric CSV tables (LPC dumps, LSF and ΔLSF
//! vectors, curves) and the number formatting they share.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::LpcFrame;

/// Scientific notation with 17 significant digits; round-trips any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

/// Parses a headerless numeric CSV. Blank lines are skipped; a first line
/// that does not parse as numbers is treated as a header when
/// `allow_header` is set. Rows keep their 1-based line numbers.
pub fn parse_numeric_csv(text: &str, path: &Path, allow_header: bool) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if let Some(j) = vals.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: format!("field {} is not finite", j + 1),
                    });
                }
                rows.push((i + 1, vals));
            }
            Err(e) if !(allow_header && rows.is_empty() && i == 0) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
            Err(_) => {}
        }
    }
    Ok(rows)
}

pub fn read_numeric_csv(path: &Path, allow_header: bool) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_numeric_csv(&text, path, allow_header)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rows of `frame_index, a_1..a_K, residual_energy`.
pub fn lpc_dump_csv(frames: &[LpcFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        let _ = writeln!(
            out,
            "{},{},{}",
            f.frame_index(),
            format_row(f.coefficients()),
            fmt_f64(f.residual_energy())
        );
    }
    out
}

/// One vector per line.
pub fn vectors_csv<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}
