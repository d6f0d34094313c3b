//! Results-table and aggregate CSV formats.
//!
//! Floats are written with 17 significant digits so that a write/read cycle
//! reproduces every `f64` bit for bit. The per-trial table carries one row
//! per (trial, bits, of) cell; the aggregate table carries mean and standard
//! error per (bits, of) cell plus a recovery-warning count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::metrics::ErrorBreakdown;

use super::{AggregateRow, ExperimentError, SweepRow};

pub const RESULTS_HEADER: &str = "trial,bits,of,comb_n,e_classical_theory,e_classical_live,\
e_mod_q_theory,e_mod_hf,e_mod_live,e_mod_ideal_sampler,recovery_warnings";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Format {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Serialize sweep rows; the header row is always present.
pub fn results_to_string(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 240);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let b = &row.breakdown;
        let comb = b.comb_n.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.trial,
            b.bits,
            fmt_f64(b.of),
            comb,
            fmt_f64(b.e_classical_theory),
            fmt_f64(b.e_classical_live),
            fmt_f64(b.e_mod_q_theory),
            fmt_f64(b.e_mod_hf),
            fmt_f64(b.e_mod_live),
            fmt_f64(b.e_mod_ideal_sampler),
            b.recovery_warnings,
        );
    }
    out
}

pub fn write_results_csv(rows: &[SweepRow], path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, results_to_string(rows)).map_err(|e| io_err(path, e))
}

/// Parse a results table, reporting the offending line on malformed input.
pub fn read_results_csv(path: &Path) -> Result<Vec<SweepRow>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_results(&text, path)
}

pub fn parse_results(text: &str, path: &Path) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        Some((_, header)) => {
            return Err(format_err(
                path,
                1,
                format!("unexpected header {header:?}"),
            ))
        }
        None => return Err(format_err(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(format_err(
                path,
                lineno,
                format!("expected 11 fields, found {}", fields.len()),
            ));
        }
        let parse_u32 = |s: &str, what: &str| {
            s.parse::<u32>()
                .map_err(|_| format_err(path, lineno, format!("bad {what} {s:?}")))
        };
        let parse_f64 = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| format_err(path, lineno, format!("bad {what} {s:?}")))
        };
        let comb_n = if fields[3].is_empty() {
            None
        } else {
            Some(parse_u32(fields[3], "comb_n")?)
        };
        rows.push(SweepRow {
            trial: parse_u32(fields[0], "trial")?,
            breakdown: ErrorBreakdown {
                bits: parse_u32(fields[1], "bits")?,
                of: parse_f64(fields[2], "of")?,
                comb_n,
                e_classical_theory: parse_f64(fields[4], "e_classical_theory")?,
                e_classical_live: parse_f64(fields[5], "e_classical_live")?,
                e_mod_q_theory: parse_f64(fields[6], "e_mod_q_theory")?,
                e_mod_hf: parse_f64(fields[7], "e_mod_hf")?,
                e_mod_live: parse_f64(fields[8], "e_mod_live")?,
                e_mod_ideal_sampler: parse_f64(fields[9], "e_mod_ideal_sampler")?,
                recovery_warnings: parse_u32(fields[10], "recovery_warnings")?,
            },
        });
    }
    Ok(rows)
}

pub const AGGREGATE_HEADER: &str = "bits,of,comb_n,trials,\
mean_e_classical_theory,se_e_classical_theory,\
mean_e_classical_live,se_e_classical_live,\
mean_e_mod_q_theory,se_e_mod_q_theory,\
mean_e_mod_hf,se_e_mod_hf,\
mean_e_mod_live,se_e_mod_live,\
mean_e_mod_ideal_sampler,se_e_mod_ideal_sampler,\
warned_trials";

pub fn aggregates_to_string(rows: &[AggregateRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 320);
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let comb = r.comb_n.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.bits,
            fmt_f64(r.of),
            comb,
            r.trials,
            fmt_f64(r.mean.e_classical_theory),
            fmt_f64(r.se.e_classical_theory),
            fmt_f64(r.mean.e_classical_live),
            fmt_f64(r.se.e_classical_live),
            fmt_f64(r.mean.e_mod_q_theory),
            fmt_f64(r.se.e_mod_q_theory),
            fmt_f64(r.mean.e_mod_hf),
            fmt_f64(r.se.e_mod_hf),
            fmt_f64(r.mean.e_mod_live),
            fmt_f64(r.se.e_mod_live),
            fmt_f64(r.mean.e_mod_ideal_sampler),
            fmt_f64(r.se.e_mod_ideal_sampler),
            r.warned_trials,
        );
    }
    out
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, aggregates_to_string(rows)).map_err(|e| io_err(path, e))
}
