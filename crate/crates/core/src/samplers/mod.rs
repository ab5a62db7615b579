//! ABC-MCMC samplers, the adaptive proposal and threshold tuning.

pub mod abc_mcmc;
pub mod chain;
pub mod proposal;
pub mod threshold;

pub use abc_mcmc::{
    handoff, mh_accept, mh_accept_log, run_exact_mh, run_pm_abc_mcmc, run_r_abc_mcmc, run_rs_abc_mcmc, run_xrs_abc_mcmc, Handoff,
    McmcSettings, RabcSettings, RsabcSettings, ADAPT_INTERVAL, STARTUP_RETRIES,
};
pub use chain::{Chain, ChainRecord, ThresholdEvent, ThresholdEventKind};
pub use proposal::ProposalState;
pub use threshold::{maybe_reduce_delta, tune_initial_delta, update_sigma_mad, ThresholdSchedule};
