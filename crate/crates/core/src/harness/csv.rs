//! CSV output of sweep results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{SummaryRow, TrialRecord};
use crate::error::{Error, Result};

pub const TRIALS_HEADER: &str = "detector,snr_db,n,trial,decision,stop_total_samples,statistic";
pub const SUMMARY_HEADER: &str = "detector,snr_db,n,pd,pfa_hat,gamma,mean_stop,median_stop";

/// `printf("%.10g")`: 10 significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-4, 1e10)`.
pub fn format_g(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent after rounding to DIGITS significant digits
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
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

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.detector
            .cmp(&b.detector)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.n.cmp(&b.n))
            .then(a.trial_index.cmp(&b.trial_index))
    });
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRIALS_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.detector,
            format_g(r.snr_db),
            r.n,
            r.trial_index,
            u8::from(r.decision),
            r.stop_total_samples,
            format_g(r.statistic)
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.detector
            .cmp(&b.detector)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.n.cmp(&b.n))
    });
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.detector,
            format_g(r.snr_db),
            r.n,
            format_g(r.pd),
            format_g(r.pfa_hat),
            format_g(r.gamma),
            format_g(r.mean_stop),
            format_g(r.median_stop)
        );
    }
    out
}

/// `<base>.trials.csv` and `<base>.summary.csv`.
pub fn output_paths(base: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = base.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".trials.csv"), with(".summary.csv"))
}

/// Writes both CSV files and returns their paths.
pub fn emit_csv(records: &[TrialRecord], summaries: &[SummaryRow], base: &Path) -> Result<(PathBuf, PathBuf)> {
    let (trials_path, summary_path) = output_paths(base);
    if let Some(dir) = trials_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&trials_path, trials_csv(records)).map_err(|e| Error::io(&trials_path, e))?;
    fs::write(&summary_path, summary_csv(summaries)).map_err(|e| Error::io(&summary_path, e))?;
    Ok((trials_path, summary_path))
}

fn fields<'a>(line: &'a str, line_no: usize, expected: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != expected {
        return Err(Error::Parse(format!(
            "line {line_no}: expected {expected} fields, found {}",
            f.len()
        )));
    }
    Ok(f)
}

fn body<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => Ok(lines.enumerate().map(|(i, l)| (i + 2, l)).filter(|(_, l)| !l.is_empty())),
        _ => Err(Error::Parse(format!("missing header `{header}`"))),
    }
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRecord>> {
    body(text, TRIALS_HEADER)?
        .map(|(no, line)| {
            let f = fields(line, no, 7)?;
            let bad = |what: &str| Error::Parse(format!("line {no}: invalid {what}"));
            Ok(TrialRecord {
                detector: f[0].to_string(),
                snr_db: parse_f64(f[1]).ok_or_else(|| bad("snr_db"))?,
                n: f[2].parse().map_err(|_| bad("n"))?,
                trial_index: f[3].parse().map_err(|_| bad("trial"))?,
                decision: match f[4] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("decision")),
                },
                stop_total_samples: f[5].parse().map_err(|_| bad("stop_total_samples"))?,
                statistic: parse_f64(f[6]).ok_or_else(|| bad("statistic"))?,
            })
        })
        .collect()
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    body(text, SUMMARY_HEADER)?
        .map(|(no, line)| {
            let f = fields(line, no, 8)?;
            let num = |i: usize, what: &str| {
                parse_f64(f[i]).ok_or_else(|| Error::Parse(format!("line {no}: invalid {what}")))
            };
            Ok(SummaryRow {
                detector: f[0].to_string(),
                snr_db: num(1, "snr_db")?,
                n: f[2]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {no}: invalid n")))?,
                pd: num(3, "pd")?,
                pfa_hat: num(4, "pfa_hat")?,
                gamma: num(5, "gamma")?,
                mean_stop: num(6, "mean_stop")?,
                median_stop: num(7, "median_stop")?,
            })
        })
        .collect()
}
