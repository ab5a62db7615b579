//! Self-tuning ABC threshold and MAD-based scaling matrix.

use crate::error::{AbcError, Result};
use crate::kernels::{ScalingMatrix, Summaries};
use crate::stats::{mad, percentile_nearest_rank};

/// Fraction of resample distances that must fall below `δ` before a
/// reduction is allowed.
pub const REDUCTION_FRACTION: f64 = 0.05;

/// Initial threshold: the nearest-rank `ψ`-percentile of the distances.
pub fn tune_initial_delta(distances: &[f64], psi: f64) -> Result<f64> {
    let d = percentile_nearest_rank(distances, psi)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(AbcError::Degenerate(format!("initial threshold {d} is not a positive finite value")));
    }
    Ok(d)
}

/// Diagonal `Σ` of squared raw MADs per summary column, floored.
pub fn update_sigma_mad(all: &Summaries) -> Result<ScalingMatrix> {
    if all.len() < 2 {
        return Err(AbcError::Parameter("MAD scaling needs at least 2 rows".into()));
    }
    let diag = (0..all.dim()).map(|j| mad(&all.column(j)).powi(2)).collect();
    ScalingMatrix::from_diag(diag)
}

/// Threshold sequence `δ_0 ≥ δ_1 ≥ ...` with periodic reduction checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    delta: f64,
    psi: f64,
    period: usize,
    pending: bool,
    history: Vec<(usize, f64)>,
}

impl ThresholdSchedule {
    /// `period` is the number of iterations between checks.
    pub fn new(delta0: f64, psi: f64, period: usize, start_iter: usize) -> Result<Self> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(AbcError::Parameter(format!("threshold must be positive, got {delta0}")));
        }
        if !(psi > 0.0 && psi <= 100.0) {
            return Err(AbcError::Parameter(format!("percentile ψ = {psi} outside (0, 100]")));
        }
        if period == 0 {
            return Err(AbcError::Parameter("check period must be positive".into()));
        }
        Ok(Self { delta: delta0, psi, period, pending: false, history: vec![(start_iter, delta0)] })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn pending(&self) -> bool {
        self.pending
    }

    /// `(iteration, δ)` for the initial value and every strict decrease.
    pub fn history(&self) -> &[(usize, f64)] {
        &self.history
    }

    /// Advances to iteration `iter` (1-based). A check falls due every
    /// `period` iterations and stays pending until a proposal is accepted;
    /// that acceptance then applies [`maybe_reduce_delta`] to the accepted
    /// proposal's distances. Returns whether `δ` decreased.
    pub fn step(&mut self, iter: usize, accepted: bool, distances: &[f64]) -> bool {
        if iter % self.period == 0 {
            self.pending = true;
        }
        if !(self.pending && accepted) {
            return false;
        }
        self.pending = false;
        let before = self.delta;
        self.delta = maybe_reduce_delta(self.delta, accepted, distances, self.psi);
        if self.delta < before {
            self.history.push((iter, self.delta));
            true
        } else {
            false
        }
    }
}

/// Reduction rule: if the proposal was accepted and at least 5% of its
/// distances lie below `δ`, return `min(δ, d_ψ)`; otherwise `δ`.
pub fn maybe_reduce_delta(delta: f64, accepted: bool, distances: &[f64], psi: f64) -> f64 {
    if !accepted || distances.is_empty() {
        return delta;
    }
    let below = distances.iter().filter(|&&d| d < delta).count();
    if (below as f64) < REDUCTION_FRACTION * distances.len() as f64 {
        return delta;
    }
    match percentile_nearest_rank(distances, psi) {
        Ok(d) if d > 0.0 => delta.min(d),
        _ => delta,
    }
}
