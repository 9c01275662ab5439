//! Small dense symmetric linear algebra.
//!
//! Matrices here are at most a few hundred rows; everything is plain
//! row-major `Vec<f64>` storage.

mod covariance;
mod jacobi;
mod tridiag;

pub use covariance::CovarianceAccumulator;
pub use jacobi::{jacobi_eigen, SymmetricEigen};
pub use tridiag::extreme_eigenvalues;

use crate::error::{Error, Result};

/// Dense real symmetric matrix.
///
/// Stored as a full row-major square; every constructor and mutator keeps
/// `m[i][j] == m[j][i]` bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle only.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    /// Builds from explicit rows; rejects non-square or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix must be square"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Sum of squared entries, equal to `Tr(M²)` for symmetric `M`.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `a * self + b * I`.
    pub fn affine_identity(&self, a: f64, b: f64) -> Self {
        let mut out = self.scaled(a);
        for i in 0..self.dim {
            out.data[i * self.dim + i] += b;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numeric(format!(
                    "matrix is not positive definite (pivot {j} = {d:e})"
                )));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        // Invert L (lower triangular), then A⁻¹ = L⁻ᵀ L⁻¹.
        let mut linv = vec![0.0; n * n];
        for j in 0..n {
            linv[j * n + j] = 1.0 / l[j * n + j];
            for i in (j + 1)..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[i * n + k] * linv[k * n + j];
                }
                linv[i * n + j] = s / l[i * n + i];
            }
        }
        Ok(Self::from_upper_fn(n, |i, j| {
            (j..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum()
        }))
    }
}

fn check_finite(m: &SymmetricMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

/// Largest and smallest eigenvalue of a symmetric matrix.
///
/// Uses Householder tridiagonalization followed by Sturm-sequence bisection
/// for the two end points of the spectrum.
pub fn eigen_extremes(m: &SymmetricMatrix) -> Result<(f64, f64)> {
    check_finite(m)?;
    Ok(extreme_eigenvalues(m))
}

/// All eigenvalues in descending order (cyclic Jacobi).
pub fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    Ok(jacobi_eigen(m).values)
}

/// Unit eigenvector of the largest eigenvalue, signed so that its
/// largest-magnitude entry is positive.
pub fn leading_eigenvector(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let eig = jacobi_eigen(m);
    let mut v = eig.vector(0);
    let pivot = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| {
            if x.abs() > best.1.abs() {
                (i, x)
            } else {
                best
            }
        })
        .0;
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}
