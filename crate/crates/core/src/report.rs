//! Run artifacts: per-path CSV files, the JSON summary and the run manifest.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{CriterionReport, EventSequence, WeightRecord};

/// `%.15g` formatting, so that times survive a text round trip to within
/// the last digit.
pub fn format_g15(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..15).contains(&exp) {
        let fixed = format!("{:.*}", (14 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `path_id,coordinate,time`, one row per event in time order.
pub fn write_events_csv<'a, W, I>(mut out: W, paths: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (u64, &'a EventSequence)>,
{
    writeln!(out, "path_id,coordinate,time")?;
    for (id, path) in paths {
        for (t, i) in path.merged() {
            writeln!(out, "{id},{i},{}", format_g15(t))?;
        }
    }
    out.flush()
}

/// `path_id,log_weight,hit_zero,quad_err`
pub fn write_weights_csv<'a, W, I>(mut out: W, records: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a WeightRecord>,
{
    writeln!(out, "path_id,log_weight,hit_zero,quad_err")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.path_id,
            format_g15(r.log_weight),
            r.hit_zero,
            format_g15(r.quadrature_error_estimate)
        )?;
    }
    out.flush()
}

/// `path_id,n_events,log_weight,hit_zero`
pub fn write_paths_csv<'a, W, I>(mut out: W, rows: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a EventSequence, &'a WeightRecord)>,
{
    writeln!(out, "path_id,n_events,log_weight,hit_zero")?;
    for (path, r) in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.path_id,
            path.total_count(),
            format_g15(r.log_weight),
            r.hit_zero
        )?;
    }
    out.flush()
}

/// One aggregate result in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub criterion_id: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_samples: Option<usize>,
    pub verdict: String,
    pub stability_flag: bool,
}

impl SummaryEntry {
    pub fn new(criterion_id: &str, value: f64, verdict: &str) -> Self {
        SummaryEntry {
            criterion_id: criterion_id.into(),
            value,
            std_error: None,
            n_samples: None,
            verdict: verdict.into(),
            stability_flag: false,
        }
    }

    pub fn with_error(mut self, std_error: f64, n_samples: usize) -> Self {
        self.std_error = Some(std_error);
        self.n_samples = Some(n_samples);
        self
    }

    pub fn flagged(mut self, stability_flag: bool) -> Self {
        self.stability_flag = stability_flag;
        self
    }
}

impl From<&CriterionReport> for SummaryEntry {
    fn from(r: &CriterionReport) -> Self {
        SummaryEntry {
            criterion_id: r.criterion_id.as_str().into(),
            value: r.value,
            std_error: r.std_error,
            n_samples: r.n_samples,
            verdict: r.verdict.as_str().into(),
            stability_flag: r.stability_flag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<SummaryEntry>,
    /// Full structured results of the command.
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub threads: usize,
    pub created_unix: u64,
    pub files: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
