use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ReportFile, ReportRow, Summary};
use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    /// One CSV file per figure panel plus `summary.json`.
    #[default]
    Delimited,
    /// `report.json` with every row plus `summary.json`.
    Structured,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Formats with [`SIGNIFICANT_DIGITS`] significant digits, in positional
/// notation for moderate magnitudes and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = round_sig(x).abs().log10().floor() as i32;
    if (-5..9).contains(&exponent) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

/// Panel (a): pooled per-file totals.
fn totals_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("file,lambda,u_tot,c_tot\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.file,
            format_sig(r.lambda),
            format_sig(r.u_tot),
            format_sig(r.c_tot)
        );
    }
    out
}

/// Panel (b): one line per (file, route) carrying any rate.
fn allocation_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("file,route,user_rate,cache_rate,split\n");
    for r in rows {
        let split = r.routes.iter().filter(|s| s.user > 0.0).count() > 1;
        for s in &r.routes {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.file,
                s.route,
                format_sig(s.user),
                format_sig(s.cache),
                u8::from(split)
            );
        }
    }
    out
}

/// Panel (c): pooled bound vs achieved freshness per file.
fn freshness_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("file,f_ub,f_so,f_sim,f_sim_std_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.file,
            format_sig(r.f_ub),
            format_sig(r.analytic),
            opt(r.simulated),
            opt(r.simulated_std_err)
        );
    }
    out
}

fn rounded_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Serialize(e.to_string()))?;
    round_numbers(&mut v);
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn round_numbers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_numbers),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn summary_json(summary: &Summary) -> Result<String> {
    rounded_json(summary)
}

/// Writes the report files into `dir`, creating it if needed, and returns
/// the paths written in a fixed order.
pub fn write_report(report: &ReportFile, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, String)> = Vec::new();
    match format {
        OutputFormat::Delimited => {
            files.push(("totals.csv", totals_csv(&report.rows)));
            files.push(("allocation.csv", allocation_csv(&report.rows)));
            files.push(("freshness.csv", freshness_csv(&report.rows)));
        }
        OutputFormat::Structured => files.push(("report.json", rounded_json(report)?)),
    }
    files.push(("summary.json", summary_json(&report.summary)?));

    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
