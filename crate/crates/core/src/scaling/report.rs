//! Byte-stable CSV and JSON output and the verdict summary.

use std::fmt::Write as _;

use serde::Serialize;

use super::sweep::{Check, Relation, SweepResult, Verdict};
use crate::error::{Error, Result};

/// Shortest decimal that round-trips (never more than 17 significant
/// digits), in exponent form for very large or very small magnitudes.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const CSV_HEADER: &str = "quantity,d,p,epsilon,eta,value,kind,h,iterations";

pub fn rows_csv(result: &SweepResult) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        let value = r.value.map(format_float).unwrap_or_default();
        let kind = if r.error.is_some() { "error" } else { r.kind.as_str() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.quantity,
            r.d,
            format_float(r.p),
            format_float(r.epsilon),
            format_float(r.eta),
            value,
            kind,
            format_float(r.h),
            r.iterations
        );
    }
    s
}

/// JSON report `{config_digest, config, rows, fits, verdicts}`.
pub fn report_json<C: Serialize>(result: &SweepResult, config: &C) -> Result<String> {
    #[derive(Serialize)]
    struct Out<'a, C> {
        config_digest: &'a str,
        config: &'a C,
        rows: &'a [super::sweep::SweepRow],
        fits: &'a [super::sweep::FitRecord],
        verdicts: &'a [Verdict],
    }
    let out = Out {
        config_digest: &result.config_digest,
        config,
        rows: &result.rows,
        fits: &result.fits,
        verdicts: &result.verdicts,
    };
    let mut s = serde_json::to_string_pretty(&out).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Reads back the parts of a JSON report needed to re-judge it.
pub fn parse_report(text: &str) -> Result<SweepResult> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySummary {
    pub lines: Vec<String>,
    pub failures: usize,
    pub error_rows: usize,
    pub exit_code: i32,
}

fn relation_text(v: &Verdict) -> String {
    let t = format_float(v.tolerance);
    match (v.check, v.relation) {
        (Check::LogLawR2, _) => format!("R2 >= {} with positive slope", format_float(v.predicted)),
        (Check::BoundedRatio, _) => format!("max/min <= {}", format_float(v.predicted)),
        (_, Relation::Within) => format!("|fit - pred| <= {t}"),
        (_, Relation::AtMost) => format!("fit <= pred + {t}"),
        (_, Relation::AtLeast) => format!("fit >= pred - {t}"),
        (_, Relation::RatioWithin) => format!("ratio within {t} relative"),
    }
}

/// One line per verdict, recomputed from the stored numbers. The exit code
/// is 1 when any verdict fails or any row carries an error.
pub fn verify_report(result: &SweepResult) -> VerifySummary {
    let mut lines = Vec::new();
    let mut failures = 0;
    for v in &result.verdicts {
        let pass = v.evaluate() && v.pass;
        if !pass {
            failures += 1;
        }
        let what = match v.check {
            Check::EtaExponent => format!(
                "eta-exponent predicted {} fitted {} +/- {}",
                format_float(v.predicted),
                format_float(v.measured),
                format_float(v.stderr)
            ),
            Check::LogLawR2 => format!(
                "log-law R2 {} slope {}",
                format_float(v.measured),
                v.slope.map(format_float).unwrap_or_default()
            ),
            Check::BoundedRatio => format!("max/min ratio {}", format_float(v.measured)),
            Check::EpsilonRatio => {
                format!("eps-ratio predicted {} measured {}", format_float(v.predicted), format_float(v.measured))
            }
        };
        let mut line = format!(
            "{} {} [{}] {} d={} p={} {}: {}, {}",
            if pass { "PASS" } else { "FAIL" },
            v.prediction,
            v.sweep,
            v.quantity,
            v.d,
            format_float(v.p),
            v.fixed,
            what,
            relation_text(v)
        );
        if !v.note.is_empty() {
            let _ = write!(line, " ({})", v.note);
        }
        lines.push(line);
    }
    let mut error_rows = 0;
    for r in result.rows.iter().filter(|r| r.error.is_some()) {
        error_rows += 1;
        lines.push(format!(
            "ERROR [{}] {} p={} epsilon={} eta={}: {}",
            r.sweep,
            r.quantity,
            format_float(r.p),
            format_float(r.epsilon),
            format_float(r.eta),
            r.error.as_deref().unwrap_or_default()
        ));
    }
    let exit_code = i32::from(failures > 0 || error_rows > 0);
    VerifySummary { lines, failures, error_rows, exit_code }
}
