use super::SymmetricMatrix;
use crate::error::{Error, Result};

/// Running sum of outer products `Σ xᵢxᵢᵀ` for streaming covariance.
///
/// By default the vectors are assumed zero-mean and the covariance is
/// `sum_outer / k`. With [`CovarianceAccumulator::demeaned`] the running
/// sample mean is subtracted instead.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    dim: usize,
    count: usize,
    // upper triangle is authoritative; mirrored on read
    sum_outer: Vec<f64>,
    sum: Option<Vec<f64>>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            sum_outer: vec![0.0; dim * dim],
            sum: None,
        }
    }

    pub fn demeaned(dim: usize) -> Self {
        Self {
            sum: Some(vec![0.0; dim]),
            ..Self::new(dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vectors accumulated so far.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn accumulate(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector length {} does not match dimension {}",
                x.len(),
                self.dim
            )));
        }
        let n = self.dim;
        for i in 0..n {
            let xi = x[i];
            let row = &mut self.sum_outer[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += xi * x[j];
            }
        }
        if let Some(sum) = self.sum.as_mut() {
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        self.count += 1;
        Ok(())
    }

    /// `Σ xᵢxᵢᵀ` as a symmetric matrix.
    pub fn sum_outer(&self) -> SymmetricMatrix {
        let n = self.dim;
        SymmetricMatrix::from_upper_fn(n, |i, j| self.sum_outer[i * n + j])
    }

    pub fn sample_covariance(&self) -> Result<SymmetricMatrix> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.dim;
        let k = self.count as f64;
        Ok(match &self.sum {
            None => SymmetricMatrix::from_upper_fn(n, |i, j| self.sum_outer[i * n + j] / k),
            Some(sum) => SymmetricMatrix::from_upper_fn(n, |i, j| {
                self.sum_outer[i * n + j] / k - (sum[i] / k) * (sum[j] / k)
            }),
        })
    }
}
