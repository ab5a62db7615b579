//! MCMC output.

use crate::kernels::ScalingMatrix;
use crate::models::Prior;

/// State of the chain after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    /// Parameter on the sampling scale.
    pub theta: Vec<f64>,
    /// Log likelihood estimate attached to the retained state (`NaN` for
    /// samplers that carry none, such as the exchange algorithm).
    pub log_lik: f64,
    pub accepted: bool,
    /// Threshold in force at this iteration (`NaN` when not applicable).
    pub delta: f64,
    /// Testing-set stratum counts of the proposal, for stratified samplers.
    pub strata: Option<Vec<usize>>,
}

/// A threshold change and the iteration it took effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEvent {
    pub iter: usize,
    pub delta: f64,
    pub kind: ThresholdEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdEventKind {
    Initial,
    Reduced,
    /// Re-initialised after the scaling matrix was updated.
    Rescaled,
}

/// An MCMC trace together with the tuned quantities a later stage inherits.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub sampler: String,
    pub names: Vec<String>,
    pub log_scale: Vec<bool>,
    pub records: Vec<ChainRecord>,
    pub threshold_trace: Vec<ThresholdEvent>,
    pub final_delta: f64,
    pub final_sigma: Option<ScalingMatrix>,
    /// Row-major proposal covariance at the end of the run.
    pub final_proposal_cov: Vec<f64>,
    pub n_simulations: u64,
    /// Wall-clock seconds spent in the sampling loop.
    pub elapsed_secs: f64,
}

impl Chain {
    pub fn new(sampler: &str, prior: &Prior) -> Self {
        Self {
            sampler: sampler.to_string(),
            names: prior.names().to_vec(),
            log_scale: prior.log_scale().to_vec(),
            records: Vec::new(),
            threshold_trace: Vec::new(),
            final_delta: f64::NAN,
            final_sigma: None,
            final_proposal_cov: Vec::new(),
            n_simulations: 0,
            elapsed_secs: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }

    /// Coordinate `j` on the sampling scale, after dropping `burn` records.
    pub fn coordinate(&self, j: usize, burn: usize) -> Vec<f64> {
        self.records.iter().skip(burn).map(|r| r.theta[j]).collect()
    }

    /// Coordinate `j` on the natural scale.
    pub fn natural_coordinate(&self, j: usize, burn: usize) -> Vec<f64> {
        let log = self.log_scale[j];
        self.records
            .iter()
            .skip(burn)
            .map(|r| if log { r.theta[j].exp() } else { r.theta[j] })
            .collect()
    }

    pub fn last_theta(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.theta.as_slice())
    }

    /// Threshold in force per iteration.
    pub fn delta_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }
}
