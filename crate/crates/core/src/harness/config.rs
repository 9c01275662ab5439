//! Experiment configuration in flat `key = value` form.
//!
//! ```text
//! # SNR sweep at fixed N
//! L = 32
//! snr_grid = -12, -9, -6, -3, 0
//! n = 300
//! detectors = alg1, alg2, mme, ed:1
//! trials = 2000
//! seed = 7
//! output = results/snr
//! ```
//!
//! Exactly one of `snr_grid` and `n_grid` must be present; the other axis
//! is fixed with `n` or `snr_db`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{NoiseModel, PuSignalModel};
use crate::threshold::CalibrationTarget;

/// Detector under test in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    /// Sequential cumulative detector, stopping by `N`.
    Cumulative,
    /// One-shot OAS ratio over `N` vectors.
    OneShot,
    MmeSample,
    Agm,
    /// Energy detection with `uncertainty_db` of noise-power uncertainty.
    Energy { uncertainty_db: f64 },
    EstimatorCorrelator,
    FeatureTemplate,
}

impl DetectorKind {
    /// The detector's statistic depends on the SNR of the grid point.
    pub fn snr_dependent(&self) -> bool {
        matches!(self, DetectorKind::EstimatorCorrelator)
    }

    pub fn is_sequential(&self) -> bool {
        matches!(self, DetectorKind::Cumulative)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::Cumulative => f.write_str("alg1"),
            DetectorKind::OneShot => f.write_str("alg2"),
            DetectorKind::MmeSample => f.write_str("mme"),
            DetectorKind::Agm => f.write_str("agm"),
            DetectorKind::Energy { uncertainty_db } => write!(f, "ed:{uncertainty_db}"),
            DetectorKind::EstimatorCorrelator => f.write_str("ec"),
            DetectorKind::FeatureTemplate => f.write_str("ftm"),
        }
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "alg1" => DetectorKind::Cumulative,
            "alg2" => DetectorKind::OneShot,
            "mme" => DetectorKind::MmeSample,
            "agm" => DetectorKind::Agm,
            "ed" => DetectorKind::Energy { uncertainty_db: 0.0 },
            "ec" => DetectorKind::EstimatorCorrelator,
            "ftm" => DetectorKind::FeatureTemplate,
            other => {
                let x = other
                    .strip_prefix("ed:")
                    .ok_or_else(|| Error::Parse(format!("unknown detector `{other}`")))?;
                let uncertainty_db: f64 = x
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid ED uncertainty `{x}`")))?;
                if !(uncertainty_db >= 0.0 && uncertainty_db.is_finite()) {
                    return Err(Error::Parse(format!("ED uncertainty must be non-negative, got {x}")));
                }
                DetectorKind::Energy { uncertainty_db }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Snr { grid: Vec<f64>, n: usize },
    SampleSize { grid: Vec<usize>, snr_db: f64 },
}

impl Sweep {
    /// `(snr_db, n)` for every grid point, in grid order.
    pub fn points(&self) -> Vec<(f64, usize)> {
        match self {
            Sweep::Snr { grid, n } => grid.iter().map(|&s| (s, *n)).collect(),
            Sweep::SampleSize { grid, snr_db } => grid.iter().map(|&n| (*snr_db, n)).collect(),
        }
    }
}

/// Feature learning for the template-matching detector: two consecutive
/// segments of `n` vectors of the PU signal at `snr_db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTraining {
    pub n: usize,
    pub snr_db: f64,
    pub gamma_e: f64,
}

impl Default for FeatureTraining {
    fn default() -> Self {
        Self {
            n: 1000,
            snr_db: 0.0,
            gamma_e: crate::detectors::DEFAULT_FLA_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub sweep: Sweep,
    pub p_fa: f64,
    /// H1 trials per grid point and H0 trials for the achieved false-alarm
    /// column.
    pub trials: usize,
    /// H0 trials used to set each threshold.
    pub calibration_trials: usize,
    pub detectors: Vec<DetectorKind>,
    pub pu_model: PuSignalModel,
    pub noise: NoiseModel,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub alg1_target: CalibrationTarget,
    pub feature_training: FeatureTraining,
    pub threshold_cache: Option<PathBuf>,
    /// Threshold applied to every detector instead of calibrating.
    pub fixed_gamma: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults for everything but the sweep.
    pub fn new(sweep: Sweep) -> Self {
        Self {
            dim: 32,
            sweep,
            p_fa: 0.01,
            trials: 2000,
            calibration_trials: 2000,
            detectors: vec![DetectorKind::Cumulative],
            pu_model: PuSignalModel::default(),
            noise: NoiseModel::default(),
            seed: 0,
            output: None,
            alg1_target: CalibrationTarget::RunningMax,
            feature_training: FeatureTraining::default(),
            threshold_cache: None,
            fixed_gamma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::Config {
            line: 0,
            field: field.to_string(),
            message,
        };
        if self.dim == 0 {
            return Err(bad("L", "must be positive".into()));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(bad("p_fa", format!("must lie in (0, 1), got {}", self.p_fa)));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be at least 1".into()));
        }
        if self.calibration_trials == 0 {
            return Err(bad("calibration_trials", "must be at least 1".into()));
        }
        if self.fixed_gamma.is_some_and(f64::is_nan) {
            return Err(bad("gamma", "must not be NaN".into()));
        }
        if self.detectors.is_empty() {
            return Err(bad("detectors", "at least one detector is required".into()));
        }
        match &self.sweep {
            Sweep::Snr { grid, n } => {
                check_grid("snr_grid", grid, |v| v.is_finite())?;
                if *n == 0 {
                    return Err(bad("n", "must be positive".into()));
                }
            }
            Sweep::SampleSize { grid, snr_db } => {
                check_grid("n_grid", grid, |&v| v > 0)?;
                if !snr_db.is_finite() {
                    return Err(bad("snr_db", "must be finite".into()));
                }
            }
        }
        self.pu_model.validate().map_err(|e| bad("pu_model", e.to_string()))?;
        self.noise.validate().map_err(|e| bad("noise_variance", e.to_string()))?;
        let ft = &self.feature_training;
        if self.detectors.contains(&DetectorKind::FeatureTemplate) && (ft.n == 0 || !ft.snr_db.is_finite()) {
            return Err(bad("ftm_training_n", "feature training needs n > 0 and a finite SNR".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

fn check_grid<T: PartialOrd + Copy>(field: &str, grid: &[T], valid: impl Fn(&T) -> bool) -> Result<()> {
    let err = |message: &str| Error::Config {
        line: 0,
        field: field.to_string(),
        message: message.to_string(),
    };
    if grid.is_empty() {
        return Err(err("grid must not be empty"));
    }
    if !grid.iter().all(valid) {
        return Err(err("grid contains an invalid value"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(err("grid must be strictly increasing"));
    }
    Ok(())
}

struct Entry {
    line: usize,
    value: String,
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, Entry> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                field: content.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config {
                    line,
                    field: key,
                    message: "unknown key".into(),
                });
            }
            if let Some(prev) = entries.get(&key) {
                return Err(Error::Config {
                    line,
                    field: key,
                    message: format!("duplicate key, first set on line {}", prev.line),
                });
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        build(&entries)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "L",
    "snr_grid",
    "n_grid",
    "n",
    "snr_db",
    "p_fa",
    "trials",
    "calibration_trials",
    "detectors",
    "pu_model",
    "ar_coefficient",
    "pam_levels",
    "pulse_span",
    "signal_power",
    "noise_variance",
    "seed",
    "output",
    "alg1_calibration",
    "gamma_e",
    "ftm_training_n",
    "ftm_training_snr_db",
    "threshold_cache",
    "gamma",
];

fn scalar<T: FromStr>(entries: &HashMap<String, Entry>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    entries
        .get(key)
        .map(|e| {
            e.value.parse::<T>().map_err(|err| Error::Config {
                line: e.line,
                field: key.to_string(),
                message: format!("invalid value `{}`: {err}", e.value),
            })
        })
        .transpose()
}

fn list<T: FromStr>(entries: &HashMap<String, Entry>, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: fmt::Display,
{
    entries
        .get(key)
        .map(|e| {
            e.value
                .split(',')
                .map(|item| {
                    item.trim().parse::<T>().map_err(|err| Error::Config {
                        line: e.line,
                        field: key.to_string(),
                        message: format!("invalid list item `{}`: {err}", item.trim()),
                    })
                })
                .collect()
        })
        .transpose()
}

fn line_of(entries: &HashMap<String, Entry>, key: &str) -> usize {
    entries.get(key).map_or(0, |e| e.line)
}

fn build(entries: &HashMap<String, Entry>) -> Result<ExperimentConfig> {
    let missing = |field: &str, message: &str| Error::Config {
        line: 0,
        field: field.to_string(),
        message: message.to_string(),
    };
    let sweep = match (list::<f64>(entries, "snr_grid")?, list::<usize>(entries, "n_grid")?) {
        (Some(grid), None) => Sweep::Snr {
            grid,
            n: scalar(entries, "n")?.ok_or_else(|| missing("n", "an SNR sweep needs a fixed `n`"))?,
        },
        (None, Some(grid)) => Sweep::SampleSize {
            grid,
            snr_db: scalar(entries, "snr_db")?
                .ok_or_else(|| missing("snr_db", "an N sweep needs a fixed `snr_db`"))?,
        },
        (Some(_), Some(_)) => {
            return Err(Error::Config {
                line: line_of(entries, "n_grid"),
                field: "n_grid".into(),
                message: "only one of `snr_grid` and `n_grid` may be given".into(),
            })
        }
        (None, None) => return Err(missing("snr_grid", "one of `snr_grid` and `n_grid` is required")),
    };

    let mut cfg = ExperimentConfig::new(sweep);
    if let Some(v) = scalar(entries, "L")? {
        cfg.dim = v;
    }
    if let Some(v) = scalar(entries, "p_fa")? {
        cfg.p_fa = v;
    }
    if let Some(v) = scalar(entries, "trials")? {
        cfg.trials = v;
        cfg.calibration_trials = v;
    }
    if let Some(v) = scalar(entries, "calibration_trials")? {
        cfg.calibration_trials = v;
    }
    if let Some(v) = list(entries, "detectors")? {
        cfg.detectors = v;
    }
    if let Some(v) = scalar(entries, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = scalar::<String>(entries, "output")? {
        cfg.output = Some(PathBuf::from(v));
    }
    if let Some(v) = scalar::<String>(entries, "threshold_cache")? {
        cfg.threshold_cache = Some(PathBuf::from(v));
    }
    if let Some(v) = scalar(entries, "gamma")? {
        cfg.fixed_gamma = Some(v);
    }
    if let Some(v) = scalar(entries, "alg1_calibration")? {
        cfg.alg1_target = v;
    }
    if let Some(v) = scalar(entries, "noise_variance")? {
        cfg.noise = NoiseModel {
            variance: v,
            uncertainty_db: 0.0,
        };
    }
    if let Some(v) = scalar(entries, "gamma_e")? {
        cfg.feature_training.gamma_e = v;
    }
    if let Some(v) = scalar(entries, "ftm_training_n")? {
        cfg.feature_training.n = v;
    }
    if let Some(v) = scalar(entries, "ftm_training_snr_db")? {
        cfg.feature_training.snr_db = v;
    }

    let power = scalar(entries, "signal_power")?.unwrap_or(1.0);
    let model = scalar::<String>(entries, "pu_model")?.unwrap_or_else(|| "ar1".into());
    let pam_only = ["pam_levels", "pulse_span"];
    cfg.pu_model = match model.as_str() {
        "ar1" => {
            if let Some(key) = pam_only.iter().find(|k| entries.contains_key(**k)) {
                return Err(Error::Config {
                    line: line_of(entries, key),
                    field: key.to_string(),
                    message: "only valid with `pu_model = pam`".into(),
                });
            }
            PuSignalModel::Ar1 {
                coefficient: scalar(entries, "ar_coefficient")?.unwrap_or(0.8),
                power,
            }
        }
        "pam" => {
            if entries.contains_key("ar_coefficient") {
                return Err(Error::Config {
                    line: line_of(entries, "ar_coefficient"),
                    field: "ar_coefficient".into(),
                    message: "only valid with `pu_model = ar1`".into(),
                });
            }
            PuSignalModel::ShapedPam {
                levels: scalar(entries, "pam_levels")?.unwrap_or(8),
                pulse_span: scalar(entries, "pulse_span")?.unwrap_or(4),
                power,
            }
        }
        other => {
            return Err(Error::Config {
                line: line_of(entries, "pu_model"),
                field: "pu_model".into(),
                message: format!("unknown model `{other}`, expected `ar1` or `pam`"),
            })
        }
    };

    cfg.validate().map_err(|e| match e {
        Error::Config { field, message, .. } => {
            let key = match field.as_str() {
                "pu_model" if entries.contains_key("signal_power") => "signal_power",
                f => f,
            };
            Error::Config {
                line: line_of(entries, key),
                field: key.to_string(),
                message,
            }
        }
        other => other,
    })?;
    Ok(cfg)
}
