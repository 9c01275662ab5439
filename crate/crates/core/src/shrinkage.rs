//! Oracle-approximating shrinkage (OAS) of a sample covariance matrix.
//!
//! The estimate is `Σ = (1 − ρ)·R̂ + ρ·(Tr(R̂)/L)·I`. The coefficient `ρ` is
//! obtained from the closed form; the fixed-point iteration that the closed
//! form is the limit of is kept for cross-checking.

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Relative size below which `Tr(R̂²) − Tr²(R̂)/L` counts as zero.
pub const DENOMINATOR_EPS: f64 = 1e-14;
/// Lower clamp on `ρ`; keeps the shrunk estimate strictly positive definite.
pub const MIN_RHO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ShrinkageResult {
    pub sigma: SymmetricMatrix,
    pub rho: f64,
    /// `Tr(R̂) / L`, the scale of the identity target.
    pub target_scale: f64,
    /// Zero for the closed-form path.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeRho {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn validate(r_hat: &SymmetricMatrix, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if !r_hat.is_finite() {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let tr = r_hat.trace();
    if tr <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "covariance trace must be positive, got {tr:e}"
        )));
    }
    Ok(tr)
}

/// Closed-form OAS coefficient for a sample covariance built from `n`
/// vectors.
pub fn oas_rho(r_hat: &SymmetricMatrix, n: usize) -> Result<f64> {
    let tr = validate(r_hat, n)?;
    let l = r_hat.dim() as f64;
    let tr_sq = r_hat.frobenius_norm_sq();
    let tr2 = tr * tr;
    let spread = tr_sq - tr2 / l;
    if spread <= DENOMINATOR_EPS * tr2 {
        return Ok(1.0);
    }
    let num = (1.0 - 2.0 / l) * tr_sq + tr2;
    let den = (n as f64 + 1.0 - 2.0 / l) * spread;
    Ok((num / den).clamp(MIN_RHO, 1.0))
}

/// Fixed-point iteration for `ρ`, starting from `Σ₀ = R̂`.
///
/// `rho0` is the starting coefficient the first step is measured against;
/// every iterate is clamped to `[MIN_RHO, 1]`. Non-convergence is reported,
/// not raised.
pub fn oas_rho_iterative(
    r_hat: &SymmetricMatrix,
    n: usize,
    rho0: f64,
    max_iter: usize,
    tol: f64,
) -> Result<IterativeRho> {
    let tr = validate(r_hat, n)?;
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::invalid(format!("rho0 must lie in (0, 1), got {rho0}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let l = r_hat.dim() as f64;
    let nf = n as f64;
    let tr_sq = r_hat.frobenius_norm_sq();
    let target = tr / l;

    // Σ_j is tracked through Tr(Σ_j R̂) = (1−ρ_j)·Tr(R̂²) + ρ_j·Tr(R̂)²/L;
    // Tr(Σ_j) equals Tr(R̂) for every j.
    let mut sigma_r = tr_sq;
    let mut rho = rho0;
    for it in 1..=max_iter {
        let num = (1.0 - 2.0 / l) * sigma_r + tr * tr;
        let den = (nf + 1.0 - 2.0 / l) * sigma_r + (1.0 - nf / l) * tr * tr;
        let next = if den > 0.0 {
            (num / den).clamp(MIN_RHO, 1.0)
        } else {
            1.0
        };
        let step = (next - rho).abs();
        rho = next;
        sigma_r = (1.0 - rho) * tr_sq + rho * target * tr;
        if step < tol {
            return Ok(IterativeRho {
                rho,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(IterativeRho {
        rho,
        iterations: max_iter,
        converged: false,
    })
}

/// Shrinks `target_scale·I` and `r_hat` together with the given weight.
pub fn shrink_with(r_hat: &SymmetricMatrix, rho: f64) -> (SymmetricMatrix, f64) {
    let target_scale = r_hat.trace() / r_hat.dim() as f64;
    (r_hat.affine_identity(1.0 - rho, rho * target_scale), target_scale)
}

/// OAS covariance estimate from a sample covariance of `n` vectors.
pub fn oas_estimate(r_hat: &SymmetricMatrix, n: usize) -> Result<ShrinkageResult> {
    let rho = oas_rho(r_hat, n)?;
    let (sigma, target_scale) = shrink_with(r_hat, rho);
    Ok(ShrinkageResult {
        sigma,
        rho,
        target_scale,
        iterations: 0,
    })
}
