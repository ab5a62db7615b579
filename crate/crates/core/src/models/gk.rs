//! The g-and-k distribution, defined through its quantile function and
//! summarised by robust order-statistic functionals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{Dataset, Shape};
use crate::error::{AbcError, Result};
use crate::kernels::Summaries;
use crate::models::prior::{Marginal, Prior};
use crate::models::Model;
use crate::resampling::{BlockScheme, IndexMatrix};
use crate::rng::RandomStream;
use crate::stats::nearest_rank;

/// The customary fixed value of `c`.
pub const GK_C: f64 = 0.8;

/// Percentile levels used by the summaries, ascending.
const LEVELS: [f64; 7] = [12.5, 25.0, 37.5, 50.0, 62.5, 75.0, 87.5];

/// `A + B (1 + c tanh(g r / 2)) (1 + r²)^k r`, the quantile map applied to a
/// standard normal value `r`.
#[inline]
pub fn gk_transform(r: f64, a: f64, b: f64, c: f64, g: f64, k: f64) -> f64 {
    // (1 - e^{-gr}) / (1 + e^{-gr}) = tanh(gr/2), stable for large |gr|
    let skew = if r == 0.0 { 0.0 } else { (0.5 * g * r).tanh() };
    a + b * (1.0 + c * skew) * (1.0 + r * r).powf(k) * r
}

fn check_params(b: f64, k: f64) -> Result<()> {
    if !(b > 0.0) {
        return Err(AbcError::Parameter(format!("g-and-k requires B > 0, got {b}")));
    }
    if !(k > -0.5) {
        return Err(AbcError::Parameter(format!("g-and-k requires k > -0.5, got {k}")));
    }
    Ok(())
}

/// Quantile function `F⁻¹(z; A, B, c, g, k)` for `z` in `(0, 1)`.
pub fn gk_quantile(z: f64, a: f64, b: f64, c: f64, g: f64, k: f64) -> Result<f64> {
    check_params(b, k)?;
    if !(z > 0.0 && z < 1.0) {
        return Err(AbcError::Parameter(format!("quantile level {z} outside (0, 1)")));
    }
    let r = Normal::standard().inverse_cdf(z);
    Ok(gk_transform(r, a, b, c, g, k))
}

/// `n_obs` draws at natural-scale `(A, B, g, k)` with `c = 0.8`.
pub fn gk_simulate(theta: &[f64; 4], n_obs: usize, rng: &mut RandomStream) -> Result<Dataset> {
    let [a, b, g, k] = *theta;
    check_params(b, k)?;
    Ok(Dataset::Scalar(
        (0..n_obs).map(|_| gk_transform(rng.standard_normal(), a, b, GK_C, g, k)).collect(),
    ))
}

fn from_percentiles(p: &[f64; 7]) -> [f64; 4] {
    let s_a = p[3];
    let s_b = p[5] - p[1];
    let s_g = (p[5] + p[1] - 2.0 * s_a) / s_b;
    let s_k = (p[6] - p[4] + p[2] - p[0]) / s_b;
    [s_a, s_b, s_g, s_k]
}

/// `(P50, IQR, (P75 + P25 - 2 P50) / IQR, (P87.5 - P62.5 + P37.5 - P12.5) / IQR)`
/// with nearest-rank percentiles.
pub fn gk_summaries(x: &[f64]) -> Result<[f64; 4]> {
    if x.is_empty() {
        return Err(AbcError::Data("g-and-k summaries of an empty sample".into()));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut p = [0.0; 7];
    for (slot, q) in p.iter_mut().zip(LEVELS) {
        *slot = v[nearest_rank(n, q) - 1];
    }
    Ok(from_percentiles(&p))
}

/// g-and-k model with `θ = (log A, log B, log g, log k)` on the sampling scale.
#[derive(Debug, Clone)]
pub struct GkModel {
    n_obs: usize,
    prior: Prior,
}

impl GkModel {
    /// Uniform priors `U(lo, hi)` on every log-parameter.
    pub fn new(n_obs: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_obs < 8 {
            return Err(AbcError::Parameter("g-and-k needs at least 8 observations".into()));
        }
        let prior = Prior::new(
            ["A", "B", "g", "k"].iter().map(|s| s.to_string()).collect(),
            vec![Marginal::Uniform { lo, hi }; 4],
            vec![true; 4],
        )?;
        Ok(Self { n_obs, prior })
    }

    pub fn reference() -> Self {
        Self::new(2000, -30.0, 30.0).expect("valid reference settings")
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }
}

impl Model for GkModel {
    fn name(&self) -> &str {
        "gk"
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn n_summaries(&self) -> usize {
        4
    }

    fn data_shape(&self) -> Shape {
        Shape::Len(self.n_obs)
    }

    fn block_scheme(&self) -> BlockScheme {
        BlockScheme::Iid
    }

    fn simulate(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Dataset> {
        let t = self.prior.to_natural(theta);
        gk_simulate(&[t[0], t[1], t[2], t[3]], self.n_obs, rng)
    }

    fn summarize(&self, x: &Dataset) -> Result<Vec<f64>> {
        Ok(gk_summaries(x.as_scalar()?)?.to_vec())
    }

    /// Sorts the simulated sample once, then finds each resample's order
    /// statistics by counting how often every rank was drawn.
    fn summarize_resamples(&self, x: &Dataset, u: &IndexMatrix, out: &mut Summaries) -> Result<()> {
        let v = x.as_scalar()?;
        let n = v.len();
        if u.n_units() != n || u.n_cols() != n {
            return Err(AbcError::Dimension { expected: n, found: u.n_cols() });
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| v[a as usize].total_cmp(&v[b as usize]));
        let mut rank = vec![0u32; n];
        for (p, &i) in order.iter().enumerate() {
            rank[i as usize] = p as u32;
        }
        let sorted: Vec<f64> = order.iter().map(|&i| v[i as usize]).collect();
        let targets: Vec<usize> = LEVELS.iter().map(|&q| nearest_rank(n, q)).collect();
        let mut counts = vec![0u32; n];
        let mut p = [0.0; 7];
        for row in u.rows() {
            counts.fill(0);
            for &i in row {
                counts[rank[i as usize] as usize] += 1;
            }
            let (mut cum, mut t) = (0usize, 0usize);
            for (pos, &c) in counts.iter().enumerate() {
                cum += c as usize;
                while t < 7 && cum >= targets[t] {
                    p[t] = sorted[pos];
                    t += 1;
                }
                if t == 7 {
                    break;
                }
            }
            out.push(&from_percentiles(&p));
        }
        Ok(())
    }
}
