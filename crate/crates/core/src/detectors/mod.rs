//! Detectors: the cumulative OAS eigenvalue-ratio detector, its one-shot
//! variant and the baseline statistics it is compared against.

mod baselines;
mod cumulative;

pub use baselines::{
    agm_ratio, circular_correlation_max, ec_weight, learn_feature_fla, statistic_agm, statistic_ec,
    statistic_ec_with_weight, statistic_ed, statistic_ftm, statistic_mme_sample,
    DEFAULT_FLA_THRESHOLD,
};
pub use cumulative::{
    metric_trajectory, oas_ratio, run_algorithm1, run_algorithm2, statistic_algorithm2,
    CumulativeDetector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    PuPresent,
    PuAbsent,
}

impl Decision {
    pub fn is_present(self) -> bool {
        self == Decision::PuPresent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionOutcome {
    pub decision: Decision,
    /// Number of sensing vectors consumed when the decision was made.
    pub stop_sample_size: usize,
    /// `stop_sample_size + L − 1` raw samples.
    pub stop_total_samples: usize,
    pub final_statistic: f64,
}

impl DecisionOutcome {
    pub(crate) fn new(decision: Decision, stop_sample_size: usize, dim: usize, statistic: f64) -> Self {
        Self {
            decision,
            stop_sample_size,
            stop_total_samples: stop_sample_size + dim - 1,
            final_statistic: statistic,
        }
    }
}
