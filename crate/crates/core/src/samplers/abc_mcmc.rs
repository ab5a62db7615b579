//! ABC-MCMC samplers: pseudo-marginal, resampling (with threshold tuning),
//! resampling with stratification, and its averaged ("exchange") variant.

use std::time::Instant;

use crate::error::{AbcError, Result};
use crate::kernels::{distances_to, KernelConfig, KernelKind, ScalingMatrix, Summaries};
use crate::models::Model;
use crate::resampling::{make_index_matrix, IndexMatrix};
use crate::rng::RandomStream;
use crate::samplers::chain::{Chain, ChainRecord, ThresholdEvent, ThresholdEventKind};
use crate::samplers::proposal::ProposalState;
use crate::samplers::threshold::{tune_initial_delta, update_sigma_mad, ThresholdSchedule};
use crate::stratification::{log_averaged_strat_likelihood, log_res_likelihood, log_strat_likelihood, StrataSpec};

/// Attempts allowed to find a starting state with a positive likelihood.
pub const STARTUP_RETRIES: usize = 100;

/// Default covariance refresh interval for the adaptive proposal.
pub const ADAPT_INTERVAL: usize = 500;

/// Metropolis-Hastings test in log space. Returns `true` with probability
/// `min{1, exp(lik_new + prior_new - lik_old - prior_old + log_q_ratio)}`.
///
/// A proposal with zero likelihood or prior is rejected without consuming a
/// random number.
pub fn mh_accept_log(
    log_lik_new: f64,
    log_prior_new: f64,
    log_lik_old: f64,
    log_prior_old: f64,
    log_q_ratio: f64,
    rng: &mut RandomStream,
) -> Result<bool> {
    if !(log_lik_old + log_prior_old).is_finite() {
        return Err(AbcError::Invariant(format!(
            "retained state has zero or invalid density (log likelihood {log_lik_old}, log prior {log_prior_old})"
        )));
    }
    if log_lik_new.is_nan() || log_prior_new.is_nan() || log_q_ratio.is_nan() {
        return Err(AbcError::Invariant("NaN in acceptance ratio".into()));
    }
    if log_lik_new == f64::NEG_INFINITY || log_prior_new == f64::NEG_INFINITY {
        return Ok(false);
    }
    let log_alpha = log_lik_new + log_prior_new - log_lik_old - log_prior_old + log_q_ratio;
    if log_alpha >= 0.0 {
        return Ok(true);
    }
    Ok(rng.uniform().ln() < log_alpha)
}

/// [`mh_accept_log`] on the natural scale.
pub fn mh_accept(lik_new: f64, prior_new: f64, lik_old: f64, prior_old: f64, q_ratio: f64, rng: &mut RandomStream) -> Result<bool> {
    if !(lik_old > 0.0 && prior_old > 0.0) {
        return Err(AbcError::Invariant(format!("retained state has likelihood {lik_old} and prior {prior_old}")));
    }
    if lik_new < 0.0 || prior_new < 0.0 || q_ratio < 0.0 {
        return Err(AbcError::Invariant("negative factor in acceptance ratio".into()));
    }
    mh_accept_log(lik_new.ln(), prior_new.ln(), lik_old.ln(), prior_old.ln(), q_ratio.ln(), rng)
}

/// Settings shared by every MCMC sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub n_iter: usize,
    /// Starting point on the sampling scale; a prior draw when absent.
    pub init: Option<Vec<f64>>,
    /// Row-major initial proposal covariance.
    pub proposal_cov: Vec<f64>,
    pub adapt: bool,
    pub adapt_interval: usize,
}

impl McmcSettings {
    /// Diagonal initial proposal, adaptation on.
    pub fn new(n_iter: usize, proposal_variances: &[f64]) -> Self {
        let p = proposal_variances.len();
        let mut cov = vec![0.0; p * p];
        for (i, v) in proposal_variances.iter().enumerate() {
            cov[i * p + i] = *v;
        }
        Self { n_iter, init: None, proposal_cov: cov, adapt: true, adapt_interval: ADAPT_INTERVAL }
    }

    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_adapt(mut self, adapt: bool) -> Self {
        self.adapt = adapt;
        self
    }

    fn proposal(&self, p: usize) -> Result<ProposalState> {
        ProposalState::from_row_major(p, &self.proposal_cov, self.adapt, self.adapt_interval.max(1))
    }

    fn start<M: Model + ?Sized>(&self, model: &M, attempt: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
        let prior = model.prior();
        let theta = match &self.init {
            Some(t) => {
                crate::error::check_len(prior.dim(), t.len())?;
                t.clone()
            }
            None => prior.sample(rng),
        };
        if prior.log_density(&theta) == f64::NEG_INFINITY {
            return Err(AbcError::Startup(format!("starting point {theta:?} has zero prior density (attempt {attempt})")));
        }
        Ok(theta)
    }
}

/// What a likelihood estimator returns for one parameter value.
struct Evaluation {
    log_lik: f64,
    strata: Option<Vec<usize>>,
}

/// Random-walk MH around a fixed-threshold likelihood estimator.
fn run_fixed<M, F>(
    name: &str,
    model: &M,
    settings: &McmcSettings,
    sims_per_eval: u64,
    delta: f64,
    rng: &mut RandomStream,
    mut estimate: F,
) -> Result<Chain>
where
    M: Model + ?Sized,
    F: FnMut(&[f64], &mut RandomStream) -> Result<Evaluation>,
{
    let prior = model.prior();
    let p = prior.dim();
    let mut proposal = settings.proposal(p)?;
    let mut chain = Chain::new(name, prior);
    let start = Instant::now();

    let mut state = None;
    for attempt in 0..STARTUP_RETRIES {
        let theta = settings.start(model, attempt, rng)?;
        let ev = estimate(&theta, rng)?;
        chain.n_simulations += sims_per_eval;
        if ev.log_lik > f64::NEG_INFINITY {
            state = Some((theta, ev.log_lik));
            break;
        }
    }
    let (mut theta, mut ll) = state.ok_or_else(|| {
        AbcError::Startup(format!("no starting point with a positive likelihood after {STARTUP_RETRIES} attempts"))
    })?;
    let mut lp = prior.log_density(&theta);

    for _ in 0..settings.n_iter {
        let prop = proposal.propose(&theta, rng);
        let lp_new = prior.log_density(&prop);
        let mut accepted = false;
        let mut strata = None;
        if lp_new > f64::NEG_INFINITY {
            let ev = estimate(&prop, rng)?;
            chain.n_simulations += sims_per_eval;
            strata = ev.strata;
            if mh_accept_log(ev.log_lik, lp_new, ll, lp, 0.0, rng)? {
                theta = prop;
                ll = ev.log_lik;
                lp = lp_new;
                accepted = true;
            }
        }
        proposal.record(&theta);
        chain.records.push(ChainRecord { theta: theta.clone(), log_lik: ll, accepted, delta, strata });
    }
    chain.elapsed_secs = start.elapsed().as_secs_f64();
    chain.final_delta = delta;
    chain.final_proposal_cov = proposal.covariance_row_major();
    Ok(chain)
}

/// Pseudo-marginal ABC-MCMC: the likelihood is the kernel average over `m`
/// independent simulations.
pub fn run_pm_abc_mcmc<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    m: usize,
    kernel: &KernelConfig,
    settings: &McmcSettings,
    rng: &mut RandomStream,
) -> Result<Chain> {
    if m == 0 {
        return Err(AbcError::Parameter("M must be at least 1".into()));
    }
    crate::error::check_len(model.n_summaries(), s_obs.len())?;
    crate::error::check_len(model.n_summaries(), kernel.n_s())?;
    let mut set = Summaries::with_capacity(model.n_summaries(), m);
    let mut chain = run_fixed("pm", model, settings, m as u64, kernel.delta, rng, |theta, rng| {
        set.clear();
        for _ in 0..m {
            let x = model.simulate(theta, rng)?;
            set.push(&model.summarize(&x)?);
        }
        let d = distances_to(&set, s_obs, &kernel.sigma)?;
        Ok(Evaluation { log_lik: log_res_likelihood(&d, kernel).log_value, strata: None })
    })?;
    chain.final_sigma = Some(kernel.sigma.clone());
    Ok(chain)
}

/// Settings for the resampling sampler with self-tuning threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RabcSettings {
    pub r: usize,
    pub kernel: KernelKind,
    /// Percentile (0, 100] used for the initial threshold and reductions.
    pub psi: f64,
    /// Iterations between reduction checks; 5% of `n_iter` when absent.
    pub period: Option<usize>,
    /// Iterations after which `Σ` is estimated from all summaries so far.
    /// Zero disables the update.
    pub k_burnin: usize,
    /// Scaling before the update; identity when absent.
    pub sigma0: Option<ScalingMatrix>,
    /// Initial threshold; the `ψ`-percentile at the starting point when absent.
    pub delta0: Option<f64>,
    /// Apply threshold reductions. With `false` the threshold stays at `δ0`.
    pub tune_delta: bool,
}

impl RabcSettings {
    pub fn new(r: usize, psi: f64, k_burnin: usize) -> Self {
        Self { r, kernel: KernelKind::Gaussian, psi, period: None, k_burnin, sigma0: None, delta0: None, tune_delta: true }
    }

    pub fn check_period(&self, n_iter: usize) -> usize {
        self.period.unwrap_or_else(|| ((0.05 * n_iter as f64).round() as usize).max(1))
    }
}

/// Resampling ABC-MCMC with the self-tuning threshold.
///
/// One dataset is simulated per proposal and resampled with a fixed index
/// matrix. The threshold starts at the `ψ`-percentile of the starting
/// distances and is reduced at check periods. After `k_burnin` iterations
/// `Σ` is replaced by the squared MADs of every summary produced so far and
/// the threshold is re-initialised under the new scaling.
pub fn run_r_abc_mcmc<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    cfg: &RabcSettings,
    settings: &McmcSettings,
    rng: &mut RandomStream,
) -> Result<Chain> {
    if cfg.r == 0 {
        return Err(AbcError::Parameter("R must be at least 1".into()));
    }
    let n_s = model.n_summaries();
    crate::error::check_len(n_s, s_obs.len())?;
    let prior = model.prior();
    let mut proposal = settings.proposal(prior.dim())?;
    let u = make_index_matrix(model.block_scheme(), model.data_shape(), cfg.r, &mut rng.child(1))?;
    let mut sigma = cfg.sigma0.clone().unwrap_or_else(|| ScalingMatrix::identity(n_s));
    crate::error::check_len(n_s, sigma.dim())?;
    let period = cfg.check_period(settings.n_iter);
    let mut chain = Chain::new("r", prior);
    let start = Instant::now();

    let resampled = |theta: &[f64], rng: &mut RandomStream, u: &IndexMatrix| -> Result<Summaries> {
        let x = model.simulate(theta, rng)?;
        let mut out = Summaries::with_capacity(n_s, u.n_rows());
        model.summarize_resamples(&x, u, &mut out)?;
        Ok(out)
    };
    let log_lik = |d: &[f64], delta: f64, sigma: &ScalingMatrix| -> Result<f64> {
        let k = KernelConfig::new(cfg.kernel, delta, sigma.clone())?;
        Ok(log_res_likelihood(d, &k).log_value)
    };

    let mut store = Summaries::new(n_s);
    let mut state = None;
    for attempt in 0..STARTUP_RETRIES {
        let theta = settings.start(model, attempt, rng)?;
        let s = resampled(&theta, rng, &u)?;
        chain.n_simulations += 1;
        let d = distances_to(&s, s_obs, &sigma)?;
        let delta = match cfg.delta0 {
            Some(v) => v,
            None => match tune_initial_delta(&d, cfg.psi) {
                Ok(v) => v,
                Err(_) => continue,
            },
        };
        let ll = log_lik(&d, delta, &sigma)?;
        if ll > f64::NEG_INFINITY {
            if cfg.k_burnin > 0 {
                store.extend(&s);
            }
            state = Some((theta, s, d, delta, ll));
            break;
        }
    }
    let (mut theta, mut s_ret, mut d_ret, delta0, mut ll) = state.ok_or_else(|| {
        AbcError::Startup(format!("no starting point with a positive likelihood after {STARTUP_RETRIES} attempts"))
    })?;
    let mut lp = prior.log_density(&theta);
    let mut schedule = ThresholdSchedule::new(delta0, cfg.psi, period, 0)?;
    chain.threshold_trace.push(ThresholdEvent { iter: 0, delta: delta0, kind: ThresholdEventKind::Initial });

    for it in 1..=settings.n_iter {
        let prop = proposal.propose(&theta, rng);
        let lp_new = prior.log_density(&prop);
        let mut accepted = false;
        let mut d_new = Vec::new();
        if lp_new > f64::NEG_INFINITY {
            let s = resampled(&prop, rng, &u)?;
            chain.n_simulations += 1;
            d_new = distances_to(&s, s_obs, &sigma)?;
            let ll_new = log_lik(&d_new, schedule.delta(), &sigma)?;
            if it <= cfg.k_burnin {
                store.extend(&s);
            }
            if mh_accept_log(ll_new, lp_new, ll, lp, 0.0, rng)? {
                theta = prop;
                lp = lp_new;
                ll = ll_new;
                s_ret = s;
                d_ret = d_new.clone();
                accepted = true;
            }
        }
        if cfg.tune_delta && schedule.step(it, accepted, &d_new) {
            let ll_red = log_lik(&d_ret, schedule.delta(), &sigma)?;
            if ll_red == f64::NEG_INFINITY {
                return Err(AbcError::Invariant(format!("threshold reduction to {} zeroed the retained likelihood", schedule.delta())));
            }
            ll = ll_red;
            chain.threshold_trace.push(ThresholdEvent { iter: it, delta: schedule.delta(), kind: ThresholdEventKind::Reduced });
        }
        if it == cfg.k_burnin {
            sigma = update_sigma_mad(&store)?;
            store = Summaries::new(n_s);
            d_ret = distances_to(&s_ret, s_obs, &sigma)?;
            let delta = tune_initial_delta(&d_ret, cfg.psi)?;
            schedule = ThresholdSchedule::new(delta, cfg.psi, period, it)?;
            ll = log_lik(&d_ret, delta, &sigma)?;
            if ll == f64::NEG_INFINITY {
                return Err(AbcError::Invariant("rescaling zeroed the retained likelihood".into()));
            }
            chain.threshold_trace.push(ThresholdEvent { iter: it, delta, kind: ThresholdEventKind::Rescaled });
        }
        proposal.record(&theta);
        chain.records.push(ChainRecord { theta: theta.clone(), log_lik: ll, accepted, delta: schedule.delta(), strata: None });
    }
    chain.elapsed_secs = start.elapsed().as_secs_f64();
    chain.final_delta = schedule.delta();
    chain.final_sigma = Some(sigma);
    chain.final_proposal_cov = proposal.covariance_row_major();
    Ok(chain)
}

/// Settings for the stratified samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct RsabcSettings {
    pub r1: usize,
    pub r2: usize,
    pub strata: StrataSpec,
    pub kernel: KernelConfig,
    /// Use the averaged estimator (training and testing sets exchanged).
    pub averaged: bool,
}

/// Resampling ABC-MCMC with stratification.
///
/// Two independent datasets are simulated per proposal. The first, resampled
/// `r1` times, estimates the stratum probabilities; the second, resampled
/// `r2` times, gives the within-stratum kernel averages. Proposals leaving a
/// stratum empty get zero likelihood.
pub fn run_rs_abc_mcmc<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    cfg: &RsabcSettings,
    settings: &McmcSettings,
    rng: &mut RandomStream,
) -> Result<Chain> {
    if cfg.r1 == 0 || cfg.r2 == 0 {
        return Err(AbcError::Parameter("R1 and R2 must be at least 1".into()));
    }
    let n_s = model.n_summaries();
    crate::error::check_len(n_s, s_obs.len())?;
    crate::error::check_len(n_s, cfg.kernel.n_s())?;
    let u1 = make_index_matrix(model.block_scheme(), model.data_shape(), cfg.r1, &mut rng.child(1))?;
    let u2 = make_index_matrix(model.block_scheme(), model.data_shape(), cfg.r2, &mut rng.child(2))?;
    let name = if cfg.averaged { "xrs" } else { "rs" };
    let mut s1 = Summaries::with_capacity(n_s, cfg.r1);
    let mut s2 = Summaries::with_capacity(n_s, cfg.r2);
    let mut chain = run_fixed(name, model, settings, 2, cfg.kernel.delta, rng, |theta, rng| {
        s1.clear();
        s2.clear();
        let x1 = model.simulate(theta, rng)?;
        let x2 = model.simulate(theta, rng)?;
        model.summarize_resamples(&x1, &u1, &mut s1)?;
        model.summarize_resamples(&x2, &u2, &mut s2)?;
        let d1 = distances_to(&s1, s_obs, &cfg.kernel.sigma)?;
        let d2 = distances_to(&s2, s_obs, &cfg.kernel.sigma)?;
        let (est, n) = if cfg.averaged {
            log_averaged_strat_likelihood(&d1, &d2, &cfg.strata, &cfg.kernel)
        } else {
            log_strat_likelihood(&d1, &d2, &cfg.strata, &cfg.kernel)
        };
        let log_lik = if est.neglected_stratum { f64::NEG_INFINITY } else { est.log_value };
        Ok(Evaluation { log_lik, strata: Some(n) })
    })?;
    chain.final_sigma = Some(cfg.kernel.sigma.clone());
    Ok(chain)
}

/// The averaged variant of [`run_rs_abc_mcmc`].
pub fn run_xrs_abc_mcmc<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    cfg: &RsabcSettings,
    settings: &McmcSettings,
    rng: &mut RandomStream,
) -> Result<Chain> {
    let cfg = RsabcSettings { averaged: true, ..cfg.clone() };
    run_rs_abc_mcmc(model, s_obs, &cfg, settings, rng)
}

/// Random-walk MH with an exact log likelihood.
pub fn run_exact_mh<M, F>(model: &M, log_lik: F, settings: &McmcSettings, rng: &mut RandomStream) -> Result<Chain>
where
    M: Model + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    run_fixed("exact", model, settings, 0, f64::NAN, rng, |theta, _| Ok(Evaluation { log_lik: log_lik(theta), strata: None }))
}

/// Quantities a stratified stage inherits from a resampling stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Handoff {
    pub theta: Vec<f64>,
    pub delta: f64,
    pub sigma: ScalingMatrix,
    /// Row-major proposal covariance.
    pub proposal_cov: Vec<f64>,
}

/// Final state of a tuned chain. Fails unless the recorded final threshold
/// equals the threshold of the last record.
pub fn handoff(chain: &Chain) -> Result<Handoff> {
    let last = chain.records.last().ok_or_else(|| AbcError::Invariant("empty chain".into()))?;
    let sigma = chain.final_sigma.clone().ok_or_else(|| AbcError::Invariant("chain carries no scaling matrix".into()))?;
    if last.delta.to_bits() != chain.final_delta.to_bits() {
        return Err(AbcError::Invariant(format!("final δ {} differs from last record {}", chain.final_delta, last.delta)));
    }
    Ok(Handoff { theta: last.theta.clone(), delta: chain.final_delta, sigma, proposal_cov: chain.final_proposal_cov.clone() })
}
