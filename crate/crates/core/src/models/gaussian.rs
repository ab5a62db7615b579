//! Gaussian toy model: `n` iid `N(θ, 1)` draws summarised by their mean,
//! with a conjugate normal prior so the exact posterior is available.

use crate::dataset::{Dataset, Shape};
use crate::error::{AbcError, Result};
use crate::kernels::Summaries;
use crate::models::prior::{Marginal, Prior};
use crate::models::Model;
use crate::resampling::{BlockScheme, IndexMatrix};
use crate::rng::RandomStream;

/// Observed sample mean used by the reference dataset.
pub const OBSERVED_MEAN: f64 = -0.0012;

#[derive(Debug, Clone)]
pub struct GaussianModel {
    n_obs: usize,
    prior: Prior,
}

impl GaussianModel {
    pub fn new(n_obs: usize, prior_mean: f64, prior_sd: f64) -> Result<Self> {
        if n_obs == 0 {
            return Err(AbcError::Parameter("n_obs must be positive".into()));
        }
        let prior = Prior::new(
            vec!["theta".into()],
            vec![Marginal::Normal { mean: prior_mean, sd: prior_sd }],
            vec![false],
        )?;
        Ok(Self { n_obs, prior })
    }

    /// The reference setup: `n = 1000`, prior `N(0.1, 0.2²)`.
    pub fn reference() -> Self {
        Self::new(1000, 0.1, 0.2).expect("valid reference settings")
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn prior_params(&self) -> (f64, f64) {
        match self.prior.marginals()[0] {
            Marginal::Normal { mean, sd } => (mean, sd),
            Marginal::Uniform { .. } => unreachable!("gaussian model has a normal prior"),
        }
    }
}

/// `n_obs` iid draws from `N(θ, 1)`.
pub fn gaussian_simulate(theta: f64, n_obs: usize, rng: &mut RandomStream) -> Dataset {
    Dataset::Scalar((0..n_obs).map(|_| theta + rng.standard_normal()).collect())
}

/// Data drawn at `θ = 0` and shifted so the sample mean equals `target_mean`.
pub fn gaussian_observed(n_obs: usize, target_mean: f64, rng: &mut RandomStream) -> Dataset {
    let Dataset::Scalar(mut x) = gaussian_simulate(0.0, n_obs, rng) else { unreachable!() };
    let m = x.iter().sum::<f64>() / n_obs as f64;
    for v in &mut x {
        *v += target_mean - m;
    }
    Dataset::Scalar(x)
}

/// Conjugate update with unit data variance; returns `(mean, sd)`.
pub fn gaussian_exact_posterior(m0: f64, sigma0: f64, xbar: f64, n_obs: usize) -> Result<(f64, f64)> {
    if !(sigma0 > 0.0) {
        return Err(AbcError::Parameter("prior sd must be positive".into()));
    }
    let prec = 1.0 / (sigma0 * sigma0) + n_obs as f64;
    let mean = (m0 / (sigma0 * sigma0) + n_obs as f64 * xbar) / prec;
    Ok((mean, prec.sqrt().recip()))
}

/// Log density of `N(θ, 1/n)` at `s`: the exact likelihood of the sample mean.
pub fn gaussian_exact_summary_loglik(theta: f64, s: f64, n_obs: usize) -> f64 {
    let n = n_obs as f64;
    -0.5 * (2.0 * std::f64::consts::PI / n).ln() - 0.5 * n * (s - theta).powi(2)
}

impl Model for GaussianModel {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn n_summaries(&self) -> usize {
        1
    }

    fn data_shape(&self) -> Shape {
        Shape::Len(self.n_obs)
    }

    fn block_scheme(&self) -> BlockScheme {
        BlockScheme::Iid
    }

    fn simulate(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Dataset> {
        Ok(gaussian_simulate(theta[0], self.n_obs, rng))
    }

    fn summarize(&self, x: &Dataset) -> Result<Vec<f64>> {
        let v = x.as_scalar()?;
        Ok(vec![v.iter().sum::<f64>() / v.len() as f64])
    }

    fn summarize_resamples(&self, x: &Dataset, u: &IndexMatrix, out: &mut Summaries) -> Result<()> {
        let v = x.as_scalar()?;
        if u.n_units() != v.len() {
            return Err(AbcError::Dimension { expected: v.len(), found: u.n_units() });
        }
        let n = v.len() as f64;
        for row in u.rows() {
            let s: f64 = row.iter().map(|&i| v[i as usize]).sum();
            out.push(&[s / n]);
        }
        Ok(())
    }
}
