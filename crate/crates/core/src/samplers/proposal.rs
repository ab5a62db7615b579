//! Gaussian random-walk proposal with Haario-style covariance adaptation.

use nalgebra::{DMatrix, DVector};

use crate::error::{AbcError, Result};
use crate::rng::RandomStream;

/// Diagonal jitter added to the adapted covariance.
pub const ADAPT_JITTER: f64 = 1e-10;

/// Proposal covariance, its Cholesky factor and the running moments of the
/// chain history used for adaptation.
#[derive(Debug, Clone)]
pub struct ProposalState {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    adapt: bool,
    interval: usize,
    count: usize,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
}

impl ProposalState {
    /// `interval` is the number of recorded states between covariance refreshes.
    pub fn new(cov: DMatrix<f64>, adapt: bool, interval: usize) -> Result<Self> {
        let p = cov.nrows();
        if p == 0 || cov.ncols() != p {
            return Err(AbcError::Parameter("proposal covariance must be square and non-empty".into()));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| AbcError::Parameter("proposal covariance is not positive definite".into()))?
            .l();
        if adapt && interval == 0 {
            return Err(AbcError::Parameter("adaptation interval must be positive".into()));
        }
        Ok(Self { cov, chol, adapt, interval, count: 0, sum: DVector::zeros(p), sum_outer: DMatrix::zeros(p, p) })
    }

    pub fn from_diag(variances: &[f64], adapt: bool, interval: usize) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)), adapt, interval)
    }

    /// Continues from a covariance in row-major form, with a fresh history.
    pub fn from_row_major(p: usize, cov: &[f64], adapt: bool, interval: usize) -> Result<Self> {
        if cov.len() != p * p {
            return Err(AbcError::Dimension { expected: p * p, found: cov.len() });
        }
        Self::new(DMatrix::from_row_slice(p, p, cov), adapt, interval)
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn covariance_row_major(&self) -> Vec<f64> {
        let p = self.dim();
        (0..p * p).map(|k| self.cov[(k / p, k % p)]).collect()
    }

    /// `θ + L z`, `z ~ N(0, I)`.
    pub fn propose(&self, theta: &[f64], rng: &mut RandomStream) -> Vec<f64> {
        let p = self.dim();
        let z: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
        (0..p)
            .map(|i| theta[i] + (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }

    /// Adds a chain state to the history; refreshes the covariance every
    /// `interval` states when adaptation is on.
    pub fn record(&mut self, theta: &[f64]) {
        if !self.adapt {
            return;
        }
        let x = DVector::from_column_slice(theta);
        self.sum += &x;
        self.sum_outer += &x * x.transpose();
        self.count += 1;
        if self.count % self.interval == 0 {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        let n = self.count as f64;
        let p = self.dim();
        if self.count < 2 {
            return;
        }
        let mean = &self.sum / n;
        let emp = (&self.sum_outer - &mean * mean.transpose() * n) / (n - 1.0);
        // a coordinate that never moved gives no usable scale
        if (0..p).any(|i| !(emp[(i, i)] > 0.0) || !emp[(i, i)].is_finite()) {
            return;
        }
        let cov = emp * (2.38f64.powi(2) / p as f64) + DMatrix::identity(p, p) * ADAPT_JITTER;
        if let Some(ch) = cov.clone().cholesky() {
            self.chol = ch.l();
            self.cov = cov;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_proposal_has_identity_covariance() {
        let s = ProposalState::from_diag(&[1.0, 1.0], false, 1).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let n = 100_000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = s.propose(&[3.0, -1.0], &mut rng);
            let (a, b) = (v[0] - 3.0, v[1] + 1.0);
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let nf = n as f64;
        // sd of a sample variance of N(0,1) is sqrt(2/n)
        let tol = 4.0 * (2.0 / nf).sqrt();
        assert!((sxx / nf - 1.0).abs() < tol);
        assert!((syy / nf - 1.0).abs() < tol);
        assert!((sxy / nf).abs() < 4.0 / nf.sqrt());
    }

    #[test]
    fn tiny_covariance_stays_put() {
        let s = ProposalState::from_diag(&[1e-20], false, 1).unwrap();
        let v = s.propose(&[0.5], &mut RandomStream::new(2, 0));
        assert!((v[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn no_adaptation_keeps_covariance() {
        let mut s = ProposalState::from_diag(&[0.3, 0.2], false, 5).unwrap();
        let before = s.covariance().clone();
        let mut rng = RandomStream::new(3, 0);
        for _ in 0..100 {
            let th = [rng.standard_normal(), rng.standard_normal()];
            s.record(&th);
        }
        assert_eq!(s.covariance(), &before);
    }

    #[test]
    fn adaptation_tracks_history() {
        let mut s = ProposalState::from_diag(&[1.0, 1.0], true, 500).unwrap();
        let mut rng = RandomStream::new(4, 0);
        for _ in 0..20_000 {
            let th = [2.0 * rng.standard_normal(), 0.5 * rng.standard_normal()];
            s.record(&th);
        }
        let scale = 2.38f64.powi(2) / 2.0;
        let c = s.covariance();
        assert!((c[(0, 0)] / (4.0 * scale) - 1.0).abs() < 0.05);
        assert!((c[(1, 1)] / (0.25 * scale) - 1.0).abs() < 0.05);
    }

    #[test]
    fn stuck_history_keeps_last_covariance() {
        let mut s = ProposalState::from_diag(&[0.1, 0.1], true, 10).unwrap();
        for _ in 0..50 {
            s.record(&[1.0, 2.0]);
        }
        assert_eq!(s.covariance()[(0, 0)], 0.1);
    }

    #[test]
    fn rejects_non_spd() {
        assert!(ProposalState::from_diag(&[1.0, 0.0], false, 1).is_err());
    }
}
