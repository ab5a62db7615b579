//! Benchmark simulators, their priors and summary statistics.

pub mod gaussian;
pub mod gk;
pub mod ising;
pub mod lotka_volterra;
pub mod pilot;
pub mod prior;

use crate::dataset::{Dataset, Shape};
use crate::error::Result;
use crate::kernels::Summaries;
use crate::resampling::{resample_into, BlockScheme, IndexMatrix};
use crate::rng::RandomStream;

pub use gaussian::GaussianModel;
pub use gk::GkModel;
pub use ising::IsingModel;
pub use lotka_volterra::{Interpolation, LvModel, LvStop};
pub use pilot::pilot_prior_predictive;
pub use prior::{Marginal, Prior};

/// A stochastic simulator with a summary-statistic map.
///
/// `theta` is always on the sampling scale defined by [`Model::prior`].
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn prior(&self) -> &Prior;

    fn n_summaries(&self) -> usize;

    /// Shape of every simulated dataset.
    fn data_shape(&self) -> Shape;

    /// Default resampling scheme for bootstrapped likelihoods.
    fn block_scheme(&self) -> BlockScheme;

    fn simulate(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Dataset>;

    fn summarize(&self, x: &Dataset) -> Result<Vec<f64>>;

    /// Summaries of every resample of `x` described by `u`, appended to `out`.
    ///
    /// The default materialises each resample and summarises it. Models may
    /// override this with faster routines or with a blockwise bootstrap of
    /// the statistic itself.
    fn summarize_resamples(&self, x: &Dataset, u: &IndexMatrix, out: &mut Summaries) -> Result<()> {
        summarize_resamples_direct(self, x, u, out)
    }

    /// Whether a prior-predictive draw enters the pilot scale estimate.
    fn pilot_keep(&self, _x: &Dataset) -> bool {
        true
    }
}

/// Reference path for [`Model::summarize_resamples`]: rebuild every resample.
pub fn summarize_resamples_direct<M: Model + ?Sized>(model: &M, x: &Dataset, u: &IndexMatrix, out: &mut Summaries) -> Result<()> {
    let scheme = model.block_scheme();
    let mut buf = x.clone();
    for row in u.rows() {
        resample_into(x, row, scheme, &mut buf)?;
        out.push(&model.summarize(&buf)?);
    }
    Ok(())
}
