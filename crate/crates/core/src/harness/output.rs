//! CSV emission and parsing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{
    BiasVarianceRow, ExperimentOutput, FinalAriRow, RunStatus, StepRow, SummaryRow,
};

pub const SUMMARY_HEADER: [&str; 12] = [
    "filter_name",
    "K",
    "zeta",
    "Np",
    "n_runs",
    "horizon",
    "mse_mean",
    "mse_stderr",
    "ari_mean",
    "ari_stderr",
    "degenerate_block_rate",
    "mean_wall_ms",
];

pub const BIAS_VARIANCE_HEADER: [&str; 10] = [
    "filter_name",
    "K",
    "zeta",
    "Np",
    "n_runs",
    "replicates",
    "bias_sq_mean",
    "bias_sq_stderr",
    "variance_mean",
    "variance_stderr",
];

/// `printf("%g")`-style formatting with 6 significant digits.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const PRECISION: i32 = 6;
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    match field {
        "NaN" | "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => field.parse().map_err(|_| Error::ParseError {
            line,
            column: 0,
            message: format!("not a number: {field:?}"),
        }),
    }
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field.parse().map_err(|_| Error::ParseError {
        line,
        column: 0,
        message: format!("not a non-negative integer: {field:?}"),
    })
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.filter_name.clone(),
            r.k.to_string(),
            r.zeta.to_string(),
            r.n_particles.to_string(),
            r.n_runs.to_string(),
            r.horizon.to_string(),
            format_g(r.mse_mean),
            format_g(r.mse_stderr),
            format_g(r.ari_mean),
            format_g(r.ari_stderr),
            format_g(r.degenerate_block_rate),
            format_g(r.mean_wall_ms),
        ])?;
    }
    finish(w)
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(reader.headers()?, &SUMMARY_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(Error::ParseError {
                line,
                column: 0,
                message: format!("expected {} fields, got {}", SUMMARY_HEADER.len(), rec.len()),
            });
        }
        rows.push(SummaryRow {
            filter_name: rec[0].to_string(),
            k: parse_usize(&rec[1], line)?,
            zeta: parse_usize(&rec[2], line)?,
            n_particles: parse_usize(&rec[3], line)?,
            n_runs: parse_usize(&rec[4], line)?,
            horizon: parse_usize(&rec[5], line)?,
            mse_mean: parse_f64(&rec[6], line)?,
            mse_stderr: parse_f64(&rec[7], line)?,
            ari_mean: parse_f64(&rec[8], line)?,
            ari_stderr: parse_f64(&rec[9], line)?,
            degenerate_block_rate: parse_f64(&rec[10], line)?,
            mean_wall_ms: parse_f64(&rec[11], line)?,
        });
    }
    Ok(rows)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::ParseError {
            line: 1,
            column: 0,
            message: format!("unexpected header, expected {}", expected.join(",")),
        });
    }
    Ok(())
}

/// Per-step rows with full-precision floats.
pub fn steps_to_csv(rows: &[StepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "t",
            "filter_name",
            "K",
            "zeta",
            "mse",
            "ari",
            "degenerate_blocks",
            "wall_ms",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    finish(w)
}

pub fn steps_from_csv(text: &str) -> Result<Vec<StepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn runs_to_csv(rows: &[RunStatus]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["run_id", "filter_name", "status", "error"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    finish(w)
}

pub fn final_ari_to_csv(rows: &[FinalAriRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["filter_name", "ari_final_mean", "ari_final_stderr"])?;
    for r in rows {
        w.write_record([
            r.filter_name.clone(),
            format_g(r.ari_final_mean),
            format_g(r.ari_final_stderr),
        ])?;
    }
    finish(w)
}

pub fn bias_variance_to_csv(rows: &[BiasVarianceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BIAS_VARIANCE_HEADER)?;
    for r in rows {
        w.write_record([
            r.filter_name.clone(),
            r.k.to_string(),
            r.zeta.to_string(),
            r.n_particles.to_string(),
            r.n_runs.to_string(),
            r.replicates.to_string(),
            format_g(r.bias_sq_mean),
            format_g(r.bias_sq_stderr),
            format_g(r.variance_mean),
            format_g(r.variance_stderr),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(e.error().to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Writes `resolved_config.json`, `runs.csv` and, depending on the mode,
/// `summary.csv`, `summary_extra.csv` and `steps.csv`, or
/// `bias_variance.csv`.
pub fn write_outputs(config: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let resolved = serde_json::to_string_pretty(&config.resolved())
        .map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("resolved_config.json"), resolved + "\n")?;
    fs::write(dir.join("runs.csv"), runs_to_csv(&output.runs)?)?;
    if output.bias_variance.is_empty() {
        fs::write(dir.join("summary.csv"), summary_to_csv(&output.summary)?)?;
        fs::write(dir.join("summary_extra.csv"), final_ari_to_csv(&output.final_ari)?)?;
        fs::write(dir.join("steps.csv"), steps_to_csv(&output.steps)?)?;
    } else {
        fs::write(
            dir.join("bias_variance.csv"),
            bias_variance_to_csv(&output.bias_variance)?,
        )?;
    }
    Ok(())
}
