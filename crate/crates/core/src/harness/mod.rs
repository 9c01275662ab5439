//! Monte-Carlo experiment runner.
//!
//! A sweep walks an SNR grid at fixed `N` or an `N` grid at fixed SNR. For
//! every grid point and detector it sets the threshold from H0 trials,
//! runs H1 trials for the detection rate and fresh H0 trials for the
//! achieved false-alarm rate.
//!
//! Every trial draws its data from seeds derived from the master seed and
//! the trial's coordinates, so results do not depend on the worker count
//! or on which other detectors and grid points are configured. All
//! detectors see the same H1 data at a given grid point and trial.

mod config;
mod csv;

pub use config::{DetectorKind, ExperimentConfig, FeatureTraining, Sweep};
pub use csv::{
    emit_csv, format_g, output_paths, parse_summary_csv, parse_trials_csv, summary_csv, trials_csv,
    SUMMARY_HEADER, TRIALS_HEADER,
};

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::detectors::{
    ec_weight, learn_feature_fla, run_algorithm1, statistic_agm, statistic_algorithm2, statistic_ed,
    statistic_ec_with_weight, statistic_ftm, statistic_mme_sample, metric_trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::rng::{derive_seed, hash_tag, rng_from_seed};
use crate::signal::{
    generate_noise, generate_pu_signal, mix_at_snr, NoiseModel, PuSignalModel, SampleStream, SensingSegment,
};
use crate::threshold::{
    calibration_trial_seed, empirical_quantile, empirical_threshold, CacheEntry, CalibrationMode,
    ThresholdCache, ThresholdParams,
};

const PHASE_CALIBRATION: u64 = 1;
const PHASE_H1: u64 = 2;
const PHASE_H0: u64 = 3;
const PHASE_FEATURE: u64 = 4;
const PHASE_CONCENTRATION_H0: u64 = 5;
const PHASE_CONCENTRATION_H1: u64 = 6;

/// Environment variable holding the worker count; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "SPECSENSE_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub detector: String,
    pub snr_db: f64,
    pub n: usize,
    pub trial_index: usize,
    pub decision: bool,
    pub stop_total_samples: usize,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub detector: String,
    pub snr_db: f64,
    pub n: usize,
    pub pd: f64,
    pub pfa_hat: f64,
    pub gamma: f64,
    /// Mean of `stop_total_samples` over H1 trials.
    pub mean_stop: f64,
    pub median_stop: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    /// H1 trials, one per detector, grid point and trial.
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

/// Worker count from [`THREADS_ENV`].
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        _ => Ok(0),
    }
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))
}

/// Signal plus noise at `snr_db` relative to the nominal noise power.
pub fn h1_stream(
    total: usize,
    model: &PuSignalModel,
    noise: &NoiseModel,
    snr_db: f64,
    noise_seed: u64,
    signal_seed: u64,
) -> Result<SampleStream> {
    let w = generate_noise(total, noise, noise_seed)?;
    let s = generate_pu_signal(total, model, signal_seed)?;
    mix_at_snr(&s, &w, snr_db)
}

/// Calibrated threshold for one detector at one operating point.
#[derive(Debug, Clone, Copy)]
struct Calibration {
    gamma: f64,
    pfa_hat: f64,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    feature: Option<Vec<f64>>,
}

impl Context<'_> {
    fn total(&self, n: usize) -> usize {
        n + self.cfg.dim - 1
    }

    /// Signal covariance scaled to the power implied by `snr_db`.
    fn signal_covariance(&self, snr_db: f64) -> SymmetricMatrix {
        let target_power = self.cfg.noise.variance * 10f64.powf(snr_db / 10.0);
        self.cfg
            .pu_model
            .covariance(self.cfg.dim)
            .scaled(target_power / self.cfg.pu_model.power())
    }

    /// Noise amplitude factor for energy detection under power uncertainty.
    fn noise_gain(&self, kind: &DetectorKind, trial_seed: u64) -> f64 {
        match kind {
            DetectorKind::Energy { uncertainty_db } if *uncertainty_db > 0.0 => {
                let mut rng = rng_from_seed(derive_seed(trial_seed, &[hash_tag(&kind.to_string())]));
                let u: f64 = rng.random_range(-uncertainty_db..=*uncertainty_db);
                10f64.powf(u / 20.0)
            }
            _ => 1.0,
        }
    }

    /// One-shot statistic of a segment for every non-sequential detector.
    fn statistic(&self, kind: &DetectorKind, segment: &SensingSegment, ec: Option<&SymmetricMatrix>) -> Result<f64> {
        match kind {
            DetectorKind::OneShot => statistic_algorithm2(segment),
            DetectorKind::MmeSample => statistic_mme_sample(segment),
            DetectorKind::Agm => statistic_agm(segment),
            DetectorKind::Energy { .. } => Ok(statistic_ed(segment, &self.cfg.noise)),
            DetectorKind::EstimatorCorrelator => {
                statistic_ec_with_weight(segment, ec.expect("EC weight prepared"))
            }
            DetectorKind::FeatureTemplate => {
                statistic_ftm(segment, self.feature.as_deref().expect("feature learned"))
            }
            DetectorKind::Cumulative => unreachable!("sequential detector has no one-shot statistic"),
        }
    }

    /// `(decision, stop_total_samples, statistic)` for one stream.
    fn decide(
        &self,
        kind: &DetectorKind,
        samples: &[f64],
        n: usize,
        gamma: f64,
        ec: Option<&SymmetricMatrix>,
    ) -> Result<(bool, usize, f64)> {
        if kind.is_sequential() {
            let out = run_algorithm1(samples, self.cfg.dim, n, gamma)?;
            return Ok((out.decision.is_present(), out.stop_total_samples, out.final_statistic));
        }
        let segment = SensingSegment::from_samples(samples, self.cfg.dim, n, 0)?;
        let t = self.statistic(kind, &segment, ec)?;
        Ok((t > gamma, self.total(n), t))
    }

    fn h0_samples(&self, n: usize, seed: u64, gain: f64) -> Result<Vec<f64>> {
        let w = generate_noise(self.total(n), &self.cfg.noise, seed)?;
        Ok(if gain == 1.0 {
            w.samples
        } else {
            w.samples.iter().map(|v| v * gain).collect()
        })
    }

    fn h1_samples(&self, grid_index: usize, trial: usize, snr_db: f64, n: usize, kind: &DetectorKind) -> Result<Vec<f64>> {
        let base = derive_seed(self.cfg.seed, &[PHASE_H1, grid_index as u64, trial as u64]);
        let gain = self.noise_gain(kind, base);
        let total = self.total(n);
        let mut w = generate_noise(total, &self.cfg.noise, derive_seed(base, &[0]))?;
        if gain != 1.0 {
            w.samples.iter_mut().for_each(|v| *v *= gain);
        }
        let s = generate_pu_signal(total, &self.cfg.pu_model, derive_seed(base, &[1]))?;
        Ok(mix_at_snr(&s, &w, snr_db)?.samples)
    }

    fn calibration_seed(&self, n: usize) -> u64 {
        derive_seed(self.cfg.seed, &[PHASE_CALIBRATION, n as u64])
    }

    fn calibrate(
        &self,
        kind: &DetectorKind,
        n: usize,
        ec: Option<&SymmetricMatrix>,
        cache: &mut Option<ThresholdCache>,
    ) -> Result<f64> {
        let cfg = self.cfg;
        let seed = self.calibration_seed(n);
        if kind.is_sequential() {
            let key = CacheEntry {
                dim: cfg.dim,
                n,
                p_fa: cfg.p_fa,
                mode: CalibrationMode::Empirical,
                seed,
                target: cfg.alg1_target,
                trials: cfg.calibration_trials,
                gamma: f64::NAN,
            };
            if let Some(gamma) = cache.as_ref().and_then(|c| c.lookup(&key)) {
                return Ok(gamma);
            }
            let params =
                ThresholdParams::empirical(cfg.p_fa, cfg.dim, n, cfg.calibration_trials).with_target(cfg.alg1_target);
            let gamma = empirical_threshold(&params, &cfg.noise, seed)?.gamma;
            if let Some(c) = cache.as_mut() {
                c.insert(CacheEntry { gamma, ..key });
            }
            return Ok(gamma);
        }
        let stats = (0..cfg.calibration_trials)
            .into_par_iter()
            .map(|i| {
                let x = self.h0_samples(n, calibration_trial_seed(seed, i), 1.0)?;
                let segment = SensingSegment::from_samples(&x, cfg.dim, n, 0)?;
                self.statistic(kind, &segment, ec)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(empirical_quantile(&stats, 1.0 - cfg.p_fa))
    }

    /// Fraction of fresh H0 trials declared present.
    fn false_alarm_rate(&self, kind: &DetectorKind, n: usize, gamma: f64, ec: Option<&SymmetricMatrix>) -> Result<f64> {
        let hits = (0..self.cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(self.cfg.seed, &[PHASE_H0, n as u64, t as u64]);
                let x = self.h0_samples(n, derive_seed(seed, &[0]), self.noise_gain(kind, seed))?;
                Ok(self.decide(kind, &x, n, gamma, ec)?.0)
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
    }
}

/// Consecutive segment pairs tried by [`learn_training_feature`].
pub const FEATURE_LEARNING_ATTEMPTS: usize = 8;

/// Feature learned blindly from the PU signal: consecutive training
/// segments are compared pairwise until one pair correlates above
/// `gamma_e`.
pub fn learn_training_feature(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let ft = &cfg.feature_training;
    let total = (FEATURE_LEARNING_ATTEMPTS + 1) * ft.n + cfg.dim - 1;
    let seed = derive_seed(cfg.seed, &[PHASE_FEATURE]);
    let x = h1_stream(
        total,
        &cfg.pu_model,
        &cfg.noise,
        ft.snr_db,
        derive_seed(seed, &[0]),
        derive_seed(seed, &[1]),
    )?;
    for i in 0..FEATURE_LEARNING_ATTEMPTS {
        let first = SensingSegment::from_samples(&x.samples, cfg.dim, ft.n, i * ft.n)?;
        let second = SensingSegment::from_samples(&x.samples, cfg.dim, ft.n, (i + 1) * ft.n)?;
        if let Some(feature) = learn_feature_fla(&first, &second, ft.gamma_e)? {
            return Ok(feature);
        }
    }
    Err(Error::Numeric(format!(
        "feature learning failed: no pair of {FEATURE_LEARNING_ATTEMPTS} consecutive training segments correlates above {}",
        ft.gamma_e
    )))
}

fn median(sorted: &[usize]) -> f64 {
    let m = sorted.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        sorted[m / 2] as f64
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) as f64
    }
}

/// Runs a sweep on a pool sized by [`THREADS_ENV`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let pool = thread_pool(threads_from_env()?)?;
    pool.install(|| run_experiment_in_pool(cfg))
}

/// Runs a sweep on the current rayon pool.
pub fn run_experiment_in_pool(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let feature = if cfg.detectors.contains(&DetectorKind::FeatureTemplate) {
        Some(learn_training_feature(cfg)?)
    } else {
        None
    };
    let ctx = Context { cfg, feature };
    let mut cache = match &cfg.threshold_cache {
        Some(path) => Some(ThresholdCache::load(path)?),
        None => None,
    };
    let mut result = ExperimentResult::default();
    if (cfg.calibration_trials as f64) < 100.0 / cfg.p_fa {
        result.warnings.push(format!(
            "{} calibration trials is below 100 / p_fa = {:.0}; thresholds are noisy",
            cfg.calibration_trials,
            100.0 / cfg.p_fa
        ));
    }

    // thresholds are shared by grid points with the same N unless the
    // detector depends on the SNR
    let mut calibrations: HashMap<(String, usize, u64), Calibration> = HashMap::new();
    for (grid_index, (snr_db, n)) in cfg.sweep.points().into_iter().enumerate() {
        for kind in &cfg.detectors {
            let ec = match kind {
                DetectorKind::EstimatorCorrelator => Some(ec_weight(&ctx.signal_covariance(snr_db), cfg.noise.variance)?),
                _ => None,
            };
            let snr_key = if kind.snr_dependent() { snr_db.to_bits() } else { 0 };
            let key = (kind.to_string(), n, snr_key);
            let cal = match calibrations.get(&key) {
                Some(c) => *c,
                None => {
                    let gamma = match cfg.fixed_gamma {
                        Some(g) => g,
                        None => ctx.calibrate(kind, n, ec.as_ref(), &mut cache)?,
                    };
                    let pfa_hat = ctx.false_alarm_rate(kind, n, gamma, ec.as_ref())?;
                    let c = Calibration { gamma, pfa_hat };
                    calibrations.insert(key, c);
                    c
                }
            };

            let outcomes = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let x = ctx.h1_samples(grid_index, t, snr_db, n, kind)?;
                    ctx.decide(kind, &x, n, cal.gamma, ec.as_ref())
                })
                .collect::<Result<Vec<_>>>()?;

            let tag = kind.to_string();
            let detected = outcomes.iter().filter(|o| o.0).count();
            let mut stops: Vec<usize> = outcomes.iter().map(|o| o.1).collect();
            let mean_stop = stops.iter().sum::<usize>() as f64 / stops.len() as f64;
            stops.sort_unstable();
            result.summaries.push(SummaryRow {
                detector: tag.clone(),
                snr_db,
                n,
                pd: detected as f64 / cfg.trials as f64,
                pfa_hat: cal.pfa_hat,
                gamma: cal.gamma,
                mean_stop,
                median_stop: median(&stops),
            });
            result
                .records
                .extend(outcomes.into_iter().enumerate().map(|(t, (decision, stop, statistic))| TrialRecord {
                    detector: tag.clone(),
                    snr_db,
                    n,
                    trial_index: t,
                    decision,
                    stop_total_samples: stop,
                    statistic,
                }));
        }
    }
    if let (Some(c), Some(path)) = (&cache, &cfg.threshold_cache) {
        c.save(path)?;
    }
    Ok(result)
}

/// Setup for the H0/H1 distribution comparison of the cumulative metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    pub dim: usize,
    pub n: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub pu_model: PuSignalModel,
    pub noise: NoiseModel,
    pub bins: usize,
}

impl ConcentrationConfig {
    pub fn new(dim: usize, n: usize, snr_db: f64, trials: usize, seed: u64) -> Self {
        Self {
            dim,
            n,
            snr_db,
            trials,
            seed,
            pu_model: PuSignalModel::default(),
            noise: NoiseModel::default(),
            bins: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` equal-width edges spanning both samples.
    pub edges: Vec<f64>,
    pub h0: Vec<usize>,
    pub h1: Vec<usize>,
}

impl Histogram {
    pub fn new(h0: &[f64], h1: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        let all = || h0.iter().chain(h1).copied();
        if all().any(|v| !v.is_finite()) {
            return Err(Error::invalid("histogram samples must be finite"));
        }
        let lo = all().fold(f64::INFINITY, f64::min);
        let mut hi = all().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return Err(Error::invalid("histogram needs at least one sample"));
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let count = |xs: &[f64]| {
            let mut c = vec![0usize; bins];
            for &v in xs {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                c[b] += 1;
            }
            c
        };
        Ok(Self {
            edges,
            h0: count(h0),
            h1: count(h1),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,lower,upper,h0,h1\n");
        for (i, (a, b)) in self.h0.iter().zip(&self.h1).enumerate() {
            out.push_str(&format!(
                "{i},{},{},{a},{b}\n",
                format_g(self.edges[i]),
                format_g(self.edges[i + 1])
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ConcentrationResult {
    /// `Q_N` per H0 trial.
    pub h0: Vec<f64>,
    /// `Q_N` per H1 trial.
    pub h1: Vec<f64>,
    pub histogram: Histogram,
}

/// `Q_N` under both hypotheses without stopping, binned on a common grid.
pub fn concentration(cfg: &ConcentrationConfig) -> Result<ConcentrationResult> {
    if cfg.trials == 0 || cfg.n == 0 || cfg.dim == 0 {
        return Err(Error::invalid("L, N and trials must be positive"));
    }
    let total = cfg.n + cfg.dim - 1;
    let final_metric = |x: &[f64]| -> Result<f64> {
        Ok(*metric_trajectory(x, cfg.dim, cfg.n)?.last().expect("N > 0"))
    };
    let h0 = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let w = generate_noise(total, &cfg.noise, derive_seed(cfg.seed, &[PHASE_CONCENTRATION_H0, t as u64]))?;
            final_metric(&w.samples)
        })
        .collect::<Result<Vec<f64>>>()?;
    let h1 = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let base = derive_seed(cfg.seed, &[PHASE_CONCENTRATION_H1, t as u64]);
            let x = h1_stream(
                total,
                &cfg.pu_model,
                &cfg.noise,
                cfg.snr_db,
                derive_seed(base, &[0]),
                derive_seed(base, &[1]),
            )?;
            final_metric(&x.samples)
        })
        .collect::<Result<Vec<f64>>>()?;
    let histogram = Histogram::new(&h0, &h1, cfg.bins)?;
    Ok(ConcentrationResult { h0, h1, histogram })
}
