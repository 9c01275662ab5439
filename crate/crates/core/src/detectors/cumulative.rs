use super::{Decision, DecisionOutcome};
use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, CovarianceAccumulator, SymmetricMatrix};
use crate::shrinkage::oas_estimate;
use crate::signal::SensingSegment;

/// `λ_max / λ_min` of the OAS estimate built from a sample covariance of
/// `n` vectors. Always `≥ 1` and finite for positive-trace input.
pub fn oas_ratio(r_hat: &SymmetricMatrix, n: usize) -> Result<f64> {
    let est = oas_estimate(r_hat, n)?;
    let (hi, lo) = eigen_extremes(&est.sigma)?;
    if !(lo > 0.0) {
        return Err(Error::Numeric(format!(
            "shrunk covariance is not positive definite (λ_min = {lo:e})"
        )));
    }
    Ok((hi / lo).max(1.0))
}

/// Streaming state of the cumulative detector.
///
/// Each new sensing vector updates the running sample covariance, the OAS
/// estimate is recomputed from scratch and its eigenvalue ratio `T_k` is
/// added to the cumulative sum `q_k = max(q_{k−1} + T_k, 0)`. The metric
/// is `Q_k = q_k / k`.
#[derive(Debug, Clone)]
pub struct CumulativeDetector {
    acc: CovarianceAccumulator,
    q: f64,
    metric: Option<f64>,
    ratios: Vec<f64>,
    stop_k: Option<usize>,
}

impl CumulativeDetector {
    pub fn new(dim: usize) -> Self {
        Self {
            acc: CovarianceAccumulator::new(dim),
            q: 0.0,
            metric: None,
            ratios: Vec::new(),
            stop_k: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.acc.dim()
    }

    /// Sensing vectors consumed so far.
    pub fn k(&self) -> usize {
        self.acc.count()
    }

    pub fn cumulative_sum(&self) -> f64 {
        self.q
    }

    /// `Q_k`; absent before the first vector.
    pub fn metric(&self) -> Option<f64> {
        self.metric
    }

    /// `T_1, …, T_k`.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn is_stopped(&self) -> bool {
        self.stop_k.is_some()
    }

    pub fn stop_k(&self) -> Option<usize> {
        self.stop_k
    }

    /// Consumes one vector and returns the updated metric, without any
    /// stopping decision.
    pub fn push(&mut self, x: &[f64]) -> Result<f64> {
        if self.is_stopped() {
            return Err(Error::State("detector has already stopped".into()));
        }
        self.acc.accumulate(x)?;
        let k = self.acc.count();
        let r_hat = self.acc.sample_covariance()?;
        let t = oas_ratio(&r_hat, k)?;
        self.ratios.push(t);
        self.q = (self.q + t).max(0.0);
        let metric = self.q / k as f64;
        self.metric = Some(metric);
        Ok(metric)
    }

    /// One iteration of the stopping rule: declares the PU present as soon as
    /// `Q_k > gamma`.
    pub fn step(&mut self, x: &[f64], gamma: f64) -> Result<Option<DecisionOutcome>> {
        let metric = self.push(x)?;
        if metric > gamma {
            let k = self.k();
            self.stop_k = Some(k);
            return Ok(Some(DecisionOutcome::new(Decision::PuPresent, k, self.dim(), metric)));
        }
        Ok(None)
    }
}

fn check_length(samples: &[f64], dim: usize, n: usize) -> Result<()> {
    if dim == 0 || n == 0 {
        return Err(Error::invalid("L and N must be positive"));
    }
    let needed = n + dim - 1;
    if samples.len() < needed {
        return Err(Error::OutOfRange {
            needed,
            available: samples.len(),
        });
    }
    Ok(())
}

/// Sequential detection over stride-1 sensing vectors, stopping at the
/// first crossing or after `n_max` vectors.
pub fn run_algorithm1(samples: &[f64], dim: usize, n_max: usize, gamma: f64) -> Result<DecisionOutcome> {
    check_length(samples, dim, n_max)?;
    let mut det = CumulativeDetector::new(dim);
    for k in 0..n_max {
        if let Some(outcome) = det.step(&samples[k..k + dim], gamma)? {
            return Ok(outcome);
        }
    }
    let q_final = det.metric().unwrap_or(f64::NAN);
    Ok(DecisionOutcome::new(Decision::PuAbsent, n_max, dim, q_final))
}

/// `Q_1, …, Q_n` without stopping.
pub fn metric_trajectory(samples: &[f64], dim: usize, n: usize) -> Result<Vec<f64>> {
    check_length(samples, dim, n)?;
    let mut det = CumulativeDetector::new(dim);
    (0..n).map(|k| det.push(&samples[k..k + dim])).collect()
}

/// `T_N` of the OAS estimate over a whole segment.
pub fn statistic_algorithm2(segment: &SensingSegment) -> Result<f64> {
    oas_ratio(&segment.sample_covariance()?, segment.sample_size())
}

/// One-shot variant: the full-segment ratio is compared with `gamma`.
pub fn run_algorithm2(segment: &SensingSegment, gamma: f64) -> Result<DecisionOutcome> {
    let t = statistic_algorithm2(segment)?;
    let decision = if t > gamma {
        Decision::PuPresent
    } else {
        Decision::PuAbsent
    };
    Ok(DecisionOutcome::new(decision, segment.sample_size(), segment.dim(), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_noise, NoiseModel};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        generate_noise(n, &NoiseModel::default(), seed).unwrap().samples
    }

    #[test]
    fn cumulative_arithmetic() {
        // q₃ = 1.2 + 1.5 + 1.3 = 4.0
        let ts = [1.2, 1.5, 1.3];
        let mut q = 0.0f64;
        for t in ts {
            q = (q + t).max(0.0);
        }
        assert!((q - 4.0).abs() < 1e-15);
        assert!((q / 3.0 - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stop_total_samples_arithmetic() {
        let out = DecisionOutcome::new(Decision::PuPresent, 2, 32, 1.4);
        assert_eq!(out.stop_total_samples, 33);
    }

    #[test]
    fn first_ratio_is_one() {
        // Rank-one covariance is shrunk completely.
        let x = noise(8, 1);
        let mut det = CumulativeDetector::new(8);
        let q = det.push(&x).unwrap();
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_threshold_never_stops() {
        let x = noise(300 + 31, 4);
        let out = run_algorithm1(&x, 32, 300, 1e300).unwrap();
        assert_eq!(out.decision, Decision::PuAbsent);
        assert_eq!(out.stop_sample_size, 300);
        assert_eq!(out.stop_total_samples, 331);
    }

    #[test]
    fn threshold_below_one_stops_immediately() {
        let x = noise(40, 4);
        let out = run_algorithm1(&x, 8, 20, 0.5).unwrap();
        assert_eq!(out.decision, Decision::PuPresent);
        assert_eq!(out.stop_sample_size, 1);
        assert_eq!(out.stop_total_samples, 8);
    }

    #[test]
    fn stepping_a_stopped_detector_fails() {
        let x = noise(16, 2);
        let mut det = CumulativeDetector::new(8);
        assert!(det.step(&x[..8], 0.5).unwrap().is_some());
        assert!(matches!(det.step(&x[1..9], 0.5), Err(Error::State(_))));
    }

    #[test]
    fn recursion_matches_direct_sum() {
        let x = noise(200 + 15, 9);
        let mut det = CumulativeDetector::new(16);
        for k in 0..200 {
            det.push(&x[k..k + 16]).unwrap();
            let direct: f64 = det.ratios().iter().sum();
            assert!((det.cumulative_sum() - direct).abs() <= 1e-9 * direct);
            assert!(det.ratios().iter().all(|&t| t >= 1.0));
        }
    }

    #[test]
    fn algorithm2_matches_last_ratio() {
        let x = noise(120 + 15, 21);
        let seg = SensingSegment::from_samples(&x, 16, 120, 0).unwrap();
        let mut det = CumulativeDetector::new(16);
        for col in seg.columns() {
            det.push(col).unwrap();
        }
        let t2 = statistic_algorithm2(&seg).unwrap();
        assert!((t2 - det.ratios()[119]).abs() <= 1e-12 * t2);
        let out = run_algorithm2(&seg, t2 + 1.0).unwrap();
        assert_eq!(out.decision, Decision::PuAbsent);
        assert_eq!(out.stop_sample_size, 120);
    }

    #[test]
    fn algorithm2_full_shrinkage_is_absent() {
        // a single all-equal column: R̂ = c·11ᵀ is rank one ⇒ ρ = 1, T = 1
        let seg = SensingSegment::from_samples(&[2.0; 4], 4, 1, 0).unwrap();
        let out = run_algorithm2(&seg, 1.0 + 1e-9).unwrap();
        assert!((out.final_statistic - 1.0).abs() < 1e-12);
        assert_eq!(out.decision, Decision::PuAbsent);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        let zeros = vec![0.0; 50];
        assert!(matches!(run_algorithm1(&zeros, 8, 10, 1.3), Err(Error::DegenerateInput(_))));
        let x = noise(10, 1);
        assert!(matches!(run_algorithm1(&x, 8, 10, 1.3), Err(Error::OutOfRange { .. })));
    }
}
