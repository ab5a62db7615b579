//! Resampling and stratified ABC-MCMC, an ABC-SMC baseline, four benchmark
//! simulators and chain diagnostics.
//!
//! Parameters are handled on the sampling scale of each model's [`Prior`];
//! likelihood estimates are carried in log space, with `-inf` standing for a
//! zero estimate.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod models;
pub mod resampling;
pub mod rng;
pub mod samplers;
pub mod smc;
pub mod stats;
pub mod stratification;

pub use dataset::{Dataset, DatasetKind, Shape};
pub use diagnostics::{
    chain_diagnostics, ess_from_iat, iat, likelihood_curve, posterior_summary, wasserstein_1d, ChainDiagnostics, CurveEstimator, CurvePoint,
    PosteriorSummary,
};
pub use error::{AbcError, Result};
pub use kernels::{distances_to, scaled_distance, KernelConfig, KernelKind, ScalingMatrix, Summaries, SummaryVector};
pub use models::{GaussianModel, GkModel, IsingModel, LvModel, Marginal, Model, Prior};
pub use resampling::{make_index_matrix, BlockScheme, IndexMatrix};
pub use rng::RandomStream;
pub use samplers::{Chain, ChainRecord, McmcSettings, RabcSettings, RsabcSettings};
pub use smc::{run_abc_smc, run_abc_smc_with, ParticlePopulation, SmcRun, SmcSettings};
pub use stratification::{LikelihoodEstimate, StrataSpec};
