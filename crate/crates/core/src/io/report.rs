//! Plain-text tables and `key = value` reports.

use std::fmt::Write;

use crate::{Error, Result};

/// Renders a left-aligned table with a dashed rule under the header.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, c) in cells.enumerate().take(cols) {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{:<w$}", c, w = widths[i]);
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut out, &mut row.iter().map(String::as_str));
    }
    out
}

/// One `key = value` line per entry. Keys must not contain whitespace or
/// `=`; values must be single-line.
pub fn format_kv(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        debug_assert!(!k.contains(char::is_whitespace) && !k.contains('='));
        debug_assert!(!v.contains('\n'));
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Parses the output of [`format_kv`]. Blank lines and `#` comments are
/// skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, reason: "missing '='".into() })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse { line: i + 1, reason: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Formats a metric with fixed precision; non-finite values print as `nan`.
pub fn fmt_metric(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "nan".into()
    }
}
