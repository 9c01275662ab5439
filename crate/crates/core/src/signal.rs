//! Sample streams for both hypotheses and their slicing into sensing
//! vectors.
//!
//! Under H0 the receiver sees white Gaussian noise; under H1 a correlated
//! primary-user (PU) signal is added. Two synthetic PU sources are
//! available: a stationary AR(1) process and multi-level PAM symbols shaped
//! by a short half-sine pulse.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CovarianceAccumulator, SymmetricMatrix};
use crate::rng::rng_from_seed;

/// Real-valued sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<f64>,
    /// Informational only.
    pub sample_rate_hz: f64,
    /// Configured model power; used to set SNR when mixing.
    pub nominal_power: f64,
}

impl SampleStream {
    /// Wraps raw samples; the nominal power is the measured mean square.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample stream contains non-finite values"));
        }
        let nominal_power = mean_square(&samples);
        Ok(Self {
            samples,
            sample_rate_hz: 1.0,
            nominal_power,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every sample multiplied by `c`; nominal power scales by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * c).collect(),
            sample_rate_hz: self.sample_rate_hz,
            nominal_power: self.nominal_power * c * c,
        }
    }
}

pub fn mean_square(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub variance: f64,
    /// Half-width in dB of the noise-power uncertainty seen by energy
    /// detection. Zero means the power is known exactly.
    pub uncertainty_db: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        Self::with_uncertainty(variance, 0.0)
    }

    pub fn with_uncertainty(variance: f64, uncertainty_db: f64) -> Result<Self> {
        let m = Self {
            variance,
            uncertainty_db,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {}",
                self.variance
            )));
        }
        if !(self.uncertainty_db >= 0.0 && self.uncertainty_db.is_finite()) {
            return Err(Error::invalid("noise uncertainty must be non-negative"));
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            variance: 1.0,
            uncertainty_db: 0.0,
        }
    }
}

/// Synthetic primary-user source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PuSignalModel {
    /// `s[n] = a·s[n−1] + √(P(1−a²))·w[n]`, started in its stationary law.
    Ar1 { coefficient: f64, power: f64 },
    /// i.i.d. uniform symbols from `{±1, ±3, …, ±(M−1)}` filtered by a
    /// half-sine pulse spanning `pulse_span` samples.
    ShapedPam {
        levels: u32,
        pulse_span: usize,
        power: f64,
    },
}

impl Default for PuSignalModel {
    fn default() -> Self {
        PuSignalModel::Ar1 {
            coefficient: 0.8,
            power: 1.0,
        }
    }
}

impl PuSignalModel {
    pub fn power(&self) -> f64 {
        match *self {
            PuSignalModel::Ar1 { power, .. } | PuSignalModel::ShapedPam { power, .. } => power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let power = self.power();
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid(format!("signal power must be positive, got {power}")));
        }
        match *self {
            PuSignalModel::Ar1 { coefficient, .. } => {
                if !(coefficient > -1.0 && coefficient < 1.0) {
                    return Err(Error::invalid(format!(
                        "AR(1) coefficient must lie in (-1, 1), got {coefficient}"
                    )));
                }
            }
            PuSignalModel::ShapedPam {
                levels, pulse_span, ..
            } => {
                if levels < 2 {
                    return Err(Error::invalid("PAM needs at least 2 levels"));
                }
                // a one-tap pulse would make the output white
                if pulse_span < 2 {
                    return Err(Error::invalid("PAM pulse span must be at least 2 samples"));
                }
            }
        }
        Ok(())
    }

    fn pulse(span: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..span)
            .map(|m| (std::f64::consts::PI * (m as f64 + 1.0) / (span as f64 + 1.0)).sin())
            .collect();
        let energy = raw.iter().map(|g| g * g).sum::<f64>().sqrt();
        raw.into_iter().map(|g| g / energy).collect()
    }

    /// Theoretical autocorrelation `E[s[n]·s[n+lag]]`.
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        match *self {
            PuSignalModel::Ar1 { coefficient, power } => power * coefficient.powi(lag as i32),
            PuSignalModel::ShapedPam {
                pulse_span, power, ..
            } => {
                let g = Self::pulse(pulse_span);
                let r: f64 = g.iter().zip(g.iter().skip(lag)).map(|(a, b)| a * b).sum();
                power * r
            }
        }
    }

    /// `L × L` Toeplitz covariance of length-`L` sensing vectors.
    pub fn covariance(&self, dim: usize) -> SymmetricMatrix {
        let r: Vec<f64> = (0..dim).map(|lag| self.autocorrelation(lag)).collect();
        SymmetricMatrix::from_upper_fn(dim, |i, j| r[j - i])
    }
}

/// White Gaussian noise with the model variance.
pub fn generate_noise(n: usize, noise: &NoiseModel, seed: u64) -> Result<SampleStream> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    noise.validate()?;
    let mut rng = rng_from_seed(seed);
    let sd = noise.variance.sqrt();
    let samples = (0..n)
        .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect::<Vec<f64>>();
    Ok(SampleStream {
        samples,
        sample_rate_hz: 1.0,
        nominal_power: noise.variance,
    })
}

/// Zero-mean correlated PU signal.
pub fn generate_pu_signal(n: usize, model: &PuSignalModel, seed: u64) -> Result<SampleStream> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    model.validate()?;
    let mut rng = rng_from_seed(seed);
    let samples = match *model {
        PuSignalModel::Ar1 { coefficient, power } => {
            let innov = (power * (1.0 - coefficient * coefficient)).sqrt();
            let mut s: f64 = power.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let mut out = Vec::with_capacity(n);
            out.push(s);
            for _ in 1..n {
                let w: f64 = StandardNormal.sample(&mut rng);
                s = coefficient * s + innov * w;
                out.push(s);
            }
            out
        }
        PuSignalModel::ShapedPam {
            levels,
            pulse_span,
            power,
        } => {
            let g = PuSignalModel::pulse(pulse_span);
            // mean square of {±1, ±3, …, ±(M−1)} is (M² − 1)/3
            let m = levels as f64;
            let sym_scale = (power / ((m * m - 1.0) / 3.0)).sqrt();
            let symbols: Vec<f64> = (0..n + pulse_span - 1)
                .map(|_| {
                    let idx = rng.random_range(0..levels) as f64;
                    sym_scale * (2.0 * idx - (m - 1.0))
                })
                .collect();
            (0..n)
                .map(|t| {
                    g.iter()
                        .enumerate()
                        .map(|(k, gk)| gk * symbols[t + pulse_span - 1 - k])
                        .sum()
                })
                .collect()
        }
    };
    Ok(SampleStream {
        samples,
        sample_rate_hz: 1.0,
        nominal_power: model.power(),
    })
}

/// Amplitude factor applied to the signal so that the configured powers
/// satisfy `10·log10(c²·Ps / Pn) = snr_db`. `snr_db = −∞` gives zero.
pub fn snr_scale(snr_db: f64, signal_power: f64, noise_power: f64) -> f64 {
    (noise_power * 10f64.powf(snr_db / 10.0) / signal_power).sqrt()
}

/// `scaled_signal + noise`, scaling the signal (never the noise).
pub fn mix_at_snr(signal: &SampleStream, noise: &SampleStream, snr_db: f64) -> Result<SampleStream> {
    if signal.len() != noise.len() {
        return Err(Error::invalid(format!(
            "signal has {} samples but noise has {}",
            signal.len(),
            noise.len()
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    if !(signal.nominal_power > 0.0) || !(noise.nominal_power > 0.0) {
        return Err(Error::invalid("mixing needs positive nominal powers"));
    }
    let c = snr_scale(snr_db, signal.nominal_power, noise.nominal_power);
    let samples = signal
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, w)| c * s + w)
        .collect();
    Ok(SampleStream {
        samples,
        sample_rate_hz: noise.sample_rate_hz,
        nominal_power: c * c * signal.nominal_power + noise.nominal_power,
    })
}

/// `L × N` matrix of overlapping sensing vectors over `N + L − 1` samples.
///
/// Column `j` is `samples[j .. j + L]`; only the underlying window is
/// stored, so the sliding-window structure holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSegment {
    dim: usize,
    columns: usize,
    window: Vec<f64>,
}

impl SensingSegment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sensing vectors `N`.
    pub fn sample_size(&self) -> usize {
        self.columns
    }

    /// `N + L − 1`.
    pub fn total_samples(&self) -> usize {
        self.window.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.window[j..j + self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.window.windows(self.dim).take(self.columns)
    }

    /// Entry `(i, j)` of the data matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.window[i + j]
    }

    pub fn samples(&self) -> &[f64] {
        &self.window
    }

    /// Zero-mean sample covariance `(1/N)·Σ xⱼxⱼᵀ` over the columns.
    pub fn sample_covariance(&self) -> Result<SymmetricMatrix> {
        let mut acc = CovarianceAccumulator::new(self.dim);
        for col in self.columns() {
            acc.accumulate(col)?;
        }
        acc.sample_covariance()
    }

    pub fn from_samples(samples: &[f64], dim: usize, columns: usize, offset: usize) -> Result<Self> {
        if dim == 0 || columns == 0 {
            return Err(Error::invalid("L and N must be positive"));
        }
        let needed = offset + columns + dim - 1;
        if needed > samples.len() {
            return Err(Error::OutOfRange {
                needed,
                available: samples.len(),
            });
        }
        Ok(Self {
            dim,
            columns,
            window: samples[offset..needed].to_vec(),
        })
    }
}

pub fn make_segment(stream: &SampleStream, dim: usize, columns: usize, offset: usize) -> Result<SensingSegment> {
    SensingSegment::from_samples(&stream.samples, dim, columns, offset)
}

/// Reads a headerless little-endian `f32` file.
///
/// With `interleaved_iq`, samples are `I, Q` pairs and only the in-phase
/// component is kept.
pub fn read_f32_file(path: &Path, interleaved_iq: bool) -> Result<SampleStream> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 4 bytes",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let samples: Vec<f64> = if interleaved_iq {
        values.step_by(2).collect()
    } else {
        values.collect()
    };
    SampleStream::from_samples(samples)
}

pub fn write_f32_file(path: &Path, samples: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = samples
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
