//! Plain-text store of calibrated thresholds.
//!
//! One record per line:
//!
//! ```text
//! L=32 N=300 p_fa=1.0000000000000000e-2 mode=empirical seed=1 target=final trials=2000 gamma=1.2719...e0
//! ```
//!
//! `target` and `trials` may be omitted and then read as `final` and `0`.
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use super::{CalibrationMode, CalibrationTarget};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub dim: usize,
    pub n: usize,
    pub p_fa: f64,
    pub mode: CalibrationMode,
    pub seed: u64,
    pub target: CalibrationTarget,
    /// H0 trials behind an empirical threshold; zero for analytic ones.
    pub trials: usize,
    pub gamma: f64,
}

impl CacheEntry {
    fn same_key(&self, other: &CacheEntry) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.p_fa.to_bits() == other.p_fa.to_bits()
            && self.mode == other.mode
            && self.seed == other.seed
            && self.target == other.target
            && self.trials == other.trials
    }

    fn to_line(&self) -> String {
        format!(
            "L={} N={} p_fa={:.16e} mode={} seed={} target={} trials={} gamma={:.16e}",
            self.dim, self.n, self.p_fa, self.mode, self.seed, self.target, self.trials, self.gamma
        )
    }

    fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let mut dim = None;
        let mut n = None;
        let mut p_fa = None;
        let mut mode = None;
        let mut seed = None;
        let mut target = CalibrationTarget::FinalMetric;
        let mut trials = 0;
        let mut gamma = None;
        let config_err = |field: &str, message: String| Error::Config {
            line: line_no,
            field: field.to_string(),
            message,
        };
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| config_err(token, "expected key=value".into()))?;
            let bad = |e: &dyn std::fmt::Display| config_err(key, format!("invalid value `{value}`: {e}"));
            match key {
                "L" => dim = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "N" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "p_fa" => p_fa = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "mode" => mode = Some(value.parse::<CalibrationMode>().map_err(|e| bad(&e))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "target" => target = value.parse::<CalibrationTarget>().map_err(|e| bad(&e))?,
                "trials" => trials = value.parse::<usize>().map_err(|e| bad(&e))?,
                "gamma" => gamma = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                other => return Err(config_err(other, "unknown field".into())),
            }
        }
        let missing = |f: &str| config_err(f, "missing field".into());
        Ok(CacheEntry {
            dim: dim.ok_or_else(|| missing("L"))?,
            n: n.ok_or_else(|| missing("N"))?,
            p_fa: p_fa.ok_or_else(|| missing("p_fa"))?,
            mode: mode.ok_or_else(|| missing("mode"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            target,
            trials,
            gamma: gamma.ok_or_else(|| missing("gamma"))?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdCache {
    entries: Vec<CacheEntry>,
}

impl ThresholdCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cache = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cache.insert(CacheEntry::parse_line(line, i + 1)?);
        }
        Ok(cache)
    }

    /// Reads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# calibrated thresholds\n");
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Threshold stored under the same key as `key`; `key.gamma` is ignored.
    pub fn lookup(&self, key: &CacheEntry) -> Option<f64> {
        self.entries.iter().find(|e| e.same_key(key)).map(|e| e.gamma)
    }

    /// Adds or replaces the record with the same key.
    pub fn insert(&mut self, entry: CacheEntry) {
        match self.entries.iter_mut().find(|e| e.same_key(&entry)) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }
}
