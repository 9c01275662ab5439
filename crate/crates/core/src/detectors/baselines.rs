//! Reference detectors: sample-covariance MME, AGM, energy detection,
//! estimator-correlator and blind feature template matching.

use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, eigenvalues, leading_eigenvector, SymmetricMatrix};
use crate::signal::{mean_square, NoiseModel, SensingSegment};

/// Default FLA learning threshold for `L = 32`.
pub const DEFAULT_FLA_THRESHOLD: f64 = 0.7;

const RANK_TOL: f64 = 1e-10;
const AGM_FLOOR: f64 = 1e-12;

/// `λ_max / λ_min` of the raw sample covariance.
///
/// Returns `+∞` when the matrix is rank deficient (`λ_min ≤ 1e-10·‖R̂‖`),
/// which is always the case for `N < L`.
pub fn statistic_mme_sample(segment: &SensingSegment) -> Result<f64> {
    let r = segment.sample_covariance()?;
    let (hi, lo) = eigen_extremes(&r)?;
    if lo <= RANK_TOL * r.frobenius_norm() {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Arithmetic-to-geometric mean ratio of a set of eigenvalues.
///
/// Values are floored at `1e-12` times their mean so that a rank-deficient
/// spectrum yields a large finite ratio.
pub fn agm_ratio(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let am = values.iter().sum::<f64>() / m;
    if !(am > 0.0) {
        return 1.0;
    }
    let floor = AGM_FLOOR * am;
    let log_gm = values.iter().map(|&v| v.max(floor).ln()).sum::<f64>() / m;
    am / log_gm.exp()
}

pub fn statistic_agm(segment: &SensingSegment) -> Result<f64> {
    let r = segment.sample_covariance()?;
    Ok(agm_ratio(&eigenvalues(&r)?))
}

/// Average energy of the segment's raw samples over the nominal noise power.
pub fn statistic_ed(segment: &SensingSegment, noise: &NoiseModel) -> f64 {
    mean_square(segment.samples()) / noise.variance
}

/// `W = R_s (R_s + σ²I)⁻¹ = I − σ²(R_s + σ²I)⁻¹`.
pub fn ec_weight(r_s: &SymmetricMatrix, noise_var: f64) -> Result<SymmetricMatrix> {
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    let (hi, lo) = eigen_extremes(r_s)?;
    if lo < -RANK_TOL * hi.abs().max(r_s.frobenius_norm()) {
        return Err(Error::invalid("signal covariance must be positive semidefinite"));
    }
    let inv = r_s.affine_identity(1.0, noise_var).spd_inverse()?;
    Ok(inv.affine_identity(-noise_var, 1.0))
}

/// `Σⱼ xⱼᵀ W xⱼ` over the segment's columns.
pub fn statistic_ec_with_weight(segment: &SensingSegment, weight: &SymmetricMatrix) -> Result<f64> {
    if weight.dim() != segment.dim() {
        return Err(Error::invalid("EC weight dimension does not match the segment"));
    }
    Ok(segment.columns().map(|x| weight.quadratic_form(x)).sum())
}

/// Estimator-correlator statistic with known signal covariance and noise
/// variance.
pub fn statistic_ec(segment: &SensingSegment, r_s: &SymmetricMatrix, noise_var: f64) -> Result<f64> {
    statistic_ec_with_weight(segment, &ec_weight(r_s, noise_var)?)
}

/// `max_l |Σ_k a[k]·b[(k + l) mod L]|`.
pub fn circular_correlation_max(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let n = a.len();
    (0..n)
        .map(|l| {
            a.iter()
                .enumerate()
                .map(|(k, ak)| ak * b[(k + l) % n])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Blind feature learning from two consecutive segments.
///
/// Returns the second segment's leading eigenvector when it correlates with
/// the first one's above `gamma_e` at some circular lag.
pub fn learn_feature_fla(
    first: &SensingSegment,
    second: &SensingSegment,
    gamma_e: f64,
) -> Result<Option<Vec<f64>>> {
    if first.dim() != second.dim() {
        return Err(Error::invalid("segments must share the same L"));
    }
    let eta_a = leading_eigenvector(&first.sample_covariance()?)?;
    let eta_b = leading_eigenvector(&second.sample_covariance()?)?;
    let t = circular_correlation_max(&eta_a, &eta_b);
    Ok((t > gamma_e).then_some(eta_b))
}

/// Template-matching statistic against a learned unit-norm feature.
pub fn statistic_ftm(segment: &SensingSegment, feature: &[f64]) -> Result<f64> {
    if feature.len() != segment.dim() {
        return Err(Error::invalid("feature length does not match L"));
    }
    let norm = feature.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("feature must be unit norm, got {norm}")));
    }
    let phi = leading_eigenvector(&segment.sample_covariance()?)?;
    Ok(circular_correlation_max(feature, &phi))
}
