//! CSV emission and parsing for sweep and transfer reports.
//!
//! Field order matches the report structs, floats carry exactly six
//! fractional digits, lines end in `\n`, and identical reports serialize
//! to identical bytes.

use std::path::Path;
use std::str::FromStr;

use crate::attacks::AttackMethod;
use crate::error::{Error, Result};

use super::{SweepReport, SweepRow, TransferReport};

const SWEEP_HEADER: &str =
    "method,epsilon,n_samples,top1_rel,top5_rel,top1_gt,top5_gt,mean_linf,mean_iterations,seed";

const TRANSFER_HEADER: &str =
    "source_model_id,target_model_id,method,epsilon,transfer_top1_rel,noise_control_top1_rel";

/// Canonical CSV text for a sweep report.
pub fn sweep_csv_string(report: &SweepReport) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            row.method,
            row.epsilon,
            row.n_samples,
            row.top1_rel,
            row.top5_rel,
            row.top1_gt,
            row.top5_gt,
            row.mean_linf,
            row.mean_iterations,
            row.seed
        ));
    }
    out
}

/// Writes the sweep CSV and returns the number of bytes written.
pub fn write_report_csv(report: &SweepReport, destination: &Path) -> Result<u64> {
    let text = sweep_csv_string(report);
    std::fs::write(destination, text.as_bytes())?;
    Ok(text.len() as u64)
}

/// Parses CSV text produced by [`sweep_csv_string`].
pub fn parse_sweep_csv(text: &str) -> Result<SweepReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == SWEEP_HEADER => {}
        other => {
            return Err(Error::arg(format!(
                "bad sweep CSV header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::arg(format!(
                "sweep CSV line {}: expected 10 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        rows.push(SweepRow {
            method: AttackMethod::from_str(fields[0])?,
            epsilon: parse_num(fields[1], lineno, "epsilon")?,
            n_samples: parse_int(fields[2], lineno, "n_samples")? as usize,
            top1_rel: parse_num(fields[3], lineno, "top1_rel")?,
            top5_rel: parse_num(fields[4], lineno, "top5_rel")?,
            top1_gt: parse_num(fields[5], lineno, "top1_gt")?,
            top5_gt: parse_num(fields[6], lineno, "top5_gt")?,
            mean_linf: parse_num(fields[7], lineno, "mean_linf")?,
            mean_iterations: parse_num(fields[8], lineno, "mean_iterations")?,
            seed: parse_int(fields[9], lineno, "seed")?,
        });
    }
    Ok(SweepReport { rows })
}

/// Canonical CSV text for a transfer report. Commas in model ids are
/// replaced with underscores to keep the format single-character-delimited.
pub fn transfer_csv_string(report: &TransferReport) -> String {
    let mut out = String::from(TRANSFER_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            row.source_model_id.replace(',', "_"),
            row.target_model_id.replace(',', "_"),
            row.method,
            row.epsilon,
            row.transfer_top1_rel,
            row.noise_control_top1_rel
        ));
    }
    out
}

/// Writes the transfer CSV and returns the number of bytes written.
pub fn write_transfer_csv(report: &TransferReport, destination: &Path) -> Result<u64> {
    let text = transfer_csv_string(report);
    std::fs::write(destination, text.as_bytes())?;
    Ok(text.len() as u64)
}

fn parse_num(field: &str, lineno: usize, name: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::arg(format!(
            "sweep CSV line {}: bad {name} value {field:?}",
            lineno + 2
        ))
    })
}

fn parse_int(field: &str, lineno: usize, name: &str) -> Result<u64> {
    field.parse::<u64>().map_err(|_| {
        Error::arg(format!(
            "sweep CSV line {}: bad {name} value {field:?}",
            lineno + 2
        ))
    })
}
