//! Threshold calibration for a target false-alarm probability.
//!
//! Two routes are offered:
//!
//! * **analytic**: the OAS estimate is treated as a raw sample covariance
//!   of `N_eq` white vectors. The largest eigenvalue then follows the real
//!   Tracy–Widom law (only its mean and variance are used) and the smallest
//!   sits at the Marchenko–Pastur edge, giving a mean and variance for the
//!   ratio `T`. Averaging `N` ratios divides the variance by `N` and a
//!   Gaussian tail gives `γ = μ + Q⁻¹(P_fa)·σ`. `N_eq` is unknown a priori;
//!   [`calibrate_n_eq`] fits it to an observed H0 mean.
//! * **empirical**: H0 Monte-Carlo trials and an upper empirical quantile.

mod cache;

pub use cache::{CacheEntry, ThresholdCache};

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::detectors::{metric_trajectory, CumulativeDetector};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::signal::{generate_noise, NoiseModel};

/// Mean of the order-1 Tracy–Widom distribution.
pub const TW_MEAN: f64 = -1.20653;
/// Variance of the order-1 Tracy–Widom distribution.
pub const TW_VARIANCE: f64 = 1.60778;

/// Standard normal upper tail `Q(t) = P(Z > t)`.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t / SQRT_2)
}

/// Inverse of [`q_function`] by bisection (interval width `1e-12`).
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // q_function is decreasing
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean and variance of the eigenvalue ratio `T` for an equivalent sample
/// count `n_eq`, with explicit Tracy–Widom constants.
pub fn tw_moments_with(n_eq: f64, dim: usize, tw_mean: f64, tw_variance: f64) -> Result<(f64, f64)> {
    let l = dim as f64;
    if dim == 0 || !(n_eq > l + 1.0) || !n_eq.is_finite() {
        return Err(Error::Domain(format!(
            "equivalent sample count must exceed L + 1 = {}, got {n_eq}",
            l + 1.0
        )));
    }
    let root_l = l.sqrt();
    let a = (n_eq - 1.0).sqrt() + root_l;
    let spread = (1.0 / (n_eq - 1.0).sqrt() + 1.0 / root_l).cbrt();
    let edge = (n_eq.sqrt() - root_l).powi(2);
    let mean = a * a / edge + a * spread * tw_mean / edge;
    let var = a * a * spread * spread * tw_variance / (edge * edge);
    Ok((mean, var))
}

pub fn tw_moments(n_eq: f64, dim: usize) -> Result<(f64, f64)> {
    tw_moments_with(n_eq, dim, TW_MEAN, TW_VARIANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationMode {
    Analytic,
    Empirical,
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationMode::Analytic => "analytic",
            CalibrationMode::Empirical => "empirical",
        })
    }
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(CalibrationMode::Analytic),
            "empirical" => Ok(CalibrationMode::Empirical),
            other => Err(Error::Parse(format!("unknown calibration mode `{other}`"))),
        }
    }
}

/// Which H0 statistic the empirical quantile is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationTarget {
    /// `Q_N`, the metric after all `N` vectors.
    FinalMetric,
    /// `max_{k≤N} Q_k`; controls the false-alarm rate of the stopping rule.
    RunningMax,
}

impl fmt::Display for CalibrationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationTarget::FinalMetric => "final",
            CalibrationTarget::RunningMax => "sequential",
        })
    }
}

impl FromStr for CalibrationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(CalibrationTarget::FinalMetric),
            "sequential" => Ok(CalibrationTarget::RunningMax),
            other => Err(Error::Parse(format!("unknown calibration target `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdParams {
    pub p_fa: f64,
    pub dim: usize,
    pub n: usize,
    pub mode: CalibrationMode,
    /// Equivalent sample count (analytic mode).
    pub n_eq: Option<f64>,
    pub tw_mean: f64,
    pub tw_variance: f64,
    /// Number of H0 trials (empirical mode).
    pub trials: usize,
    pub target: CalibrationTarget,
}

impl ThresholdParams {
    pub fn analytic(p_fa: f64, dim: usize, n: usize, n_eq: f64) -> Self {
        Self {
            p_fa,
            dim,
            n,
            mode: CalibrationMode::Analytic,
            n_eq: Some(n_eq),
            tw_mean: TW_MEAN,
            tw_variance: TW_VARIANCE,
            trials: 0,
            target: CalibrationTarget::FinalMetric,
        }
    }

    pub fn empirical(p_fa: f64, dim: usize, n: usize, trials: usize) -> Self {
        Self {
            p_fa,
            dim,
            n,
            mode: CalibrationMode::Empirical,
            n_eq: None,
            tw_mean: TW_MEAN,
            tw_variance: TW_VARIANCE,
            trials,
            target: CalibrationTarget::FinalMetric,
        }
    }

    pub fn with_target(mut self, target: CalibrationTarget) -> Self {
        self.target = target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::invalid(format!("p_fa must lie in (0, 1), got {}", self.p_fa)));
        }
        if self.dim == 0 || self.n == 0 {
            return Err(Error::invalid("L and N must be positive"));
        }
        match self.mode {
            CalibrationMode::Analytic => {
                let n_eq = self
                    .n_eq
                    .ok_or_else(|| Error::invalid("analytic mode needs n_eq"))?;
                if !(n_eq > self.dim as f64) {
                    return Err(Error::Domain(format!(
                        "n_eq must exceed L = {}, got {n_eq}",
                        self.dim
                    )));
                }
            }
            CalibrationMode::Empirical => {
                if self.trials == 0 {
                    return Err(Error::invalid("empirical mode needs at least one trial"));
                }
            }
        }
        Ok(())
    }
}

/// `γ = μ_Q + Q⁻¹(P_fa)·σ_Q` with `σ_Q² = σ_T² / N`.
pub fn analytic_threshold(p: &ThresholdParams) -> Result<f64> {
    p.validate()?;
    let n_eq = p
        .n_eq
        .ok_or_else(|| Error::invalid("analytic threshold needs n_eq"))?;
    let (mean, var) = tw_moments_with(n_eq, p.dim, p.tw_mean, p.tw_variance)?;
    Ok(mean + q_inverse(p.p_fa)? * (var / p.n as f64).sqrt())
}

/// Finds `n_eq` whose analytic mean matches `target_mean`, searching
/// `(L + 2, 1e8)` on a log scale.
pub fn calibrate_n_eq(target_mean: f64, dim: usize) -> Result<f64> {
    let lo_bound = dim as f64 + 2.0;
    let hi_bound = 1e8;
    let mean_at = |n: f64| tw_moments(n, dim).map(|m| m.0);
    let (m_lo, m_hi) = (mean_at(lo_bound)?, mean_at(hi_bound)?);
    if !(target_mean < m_lo && target_mean > m_hi) {
        return Err(Error::Domain(format!(
            "mean {target_mean} is outside the reachable range ({m_hi}, {m_lo})"
        )));
    }
    let (mut a, mut b) = (lo_bound.ln(), hi_bound.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mean_at(mid.exp())? > target_mean {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Upper empirical quantile ("higher" interpolation): the smallest sample
/// at or above rank `q·(n − 1)`.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (q * (sorted.len() - 1) as f64).ceil() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

#[derive(Debug, Clone)]
pub struct EmpiricalThreshold {
    pub gamma: f64,
    pub trials: usize,
    /// Set when `trials < 100 / p_fa`.
    pub insufficient_trials: bool,
    /// The H0 statistics, in trial order.
    pub statistics: Vec<f64>,
}

/// Seed of H0 calibration trial `index`.
pub fn calibration_trial_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[0x4830_4341_4c49_4200, index as u64])
}

/// Runs `p.trials` H0 simulations of the cumulative detector and returns the
/// `1 − P_fa` quantile of the configured statistic.
pub fn empirical_threshold(p: &ThresholdParams, noise: &NoiseModel, seed: u64) -> Result<EmpiricalThreshold> {
    p.validate()?;
    noise.validate()?;
    let total = p.n + p.dim - 1;
    let statistics = (0..p.trials)
        .into_par_iter()
        .map(|i| {
            let x = generate_noise(total, noise, calibration_trial_seed(seed, i))?;
            match p.target {
                CalibrationTarget::FinalMetric => {
                    let mut det = CumulativeDetector::new(p.dim);
                    let mut q = 0.0;
                    for k in 0..p.n {
                        q = det.push(&x.samples[k..k + p.dim])?;
                    }
                    Ok(q)
                }
                CalibrationTarget::RunningMax => Ok(metric_trajectory(&x.samples, p.dim, p.n)?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EmpiricalThreshold {
        gamma: empirical_quantile(&statistics, 1.0 - p.p_fa),
        trials: p.trials,
        insufficient_trials: (p.trials as f64) < 100.0 / p.p_fa,
        statistics,
    })
}
