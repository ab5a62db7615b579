//! Chain and posterior quality metrics.

use rayon::prelude::*;

use crate::error::{AbcError, Result};
use crate::kernels::{distances_to, KernelConfig, Summaries};
use crate::models::Model;
use crate::resampling::make_index_matrix;
use crate::rng::RandomStream;
use crate::samplers::Chain;
use crate::stats::{mean, median, percentile_sorted};
use crate::stratification::{log_averaged_strat_likelihood, log_res_likelihood, log_strat_likelihood, StrataSpec};

/// Minimum series length accepted by [`iat`].
pub const MIN_IAT_LEN: usize = 10;

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Integrated autocorrelation time with Geyer's initial positive sequence:
/// pairs `γ(2m) + γ(2m+1)` of the biased autocovariance are summed while
/// positive. Values below one are clipped to one.
pub fn iat(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_IAT_LEN {
        return Err(AbcError::Parameter(format!("IAT needs at least {MIN_IAT_LEN} values, got {n}")));
    }
    let m = mean(series);
    let g0 = autocov(series, m, 0);
    if !(g0 > 0.0) || !g0.is_finite() {
        return Err(AbcError::Degenerate("constant series has no autocorrelation time".into()));
    }
    let mut sum = 0.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = autocov(series, m, k) + autocov(series, m, k + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        k += 2;
    }
    Ok(((2.0 * sum - g0) / g0).max(1.0))
}

/// `n / iat`.
pub fn ess_from_iat(n_retained: usize, iat: f64) -> f64 {
    n_retained as f64 / iat
}

/// Exact L1 distance between the empirical quantile functions of `a` and `b`.
/// For equal sizes this is the mean absolute difference of matched order
/// statistics.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(AbcError::Parameter("Wasserstein distance of an empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    if n == m {
        return Ok(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / n as f64);
    }
    // quantile steps at i/n and j/m, on the common grid 1/(n·m)
    let l = n * m;
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0usize);
    let mut total = 0.0;
    while pos < l {
        let next = ((i + 1) * m).min((j + 1) * n);
        total += (next - pos) as f64 * (x[i] - y[j]).abs();
        pos = next;
        if next == (i + 1) * m {
            i += 1;
        }
        if next == (j + 1) * n {
            j += 1;
        }
    }
    Ok(total / l as f64)
}

/// Mean and nearest-rank 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn posterior_summary(values: &[f64]) -> Result<PosteriorSummary> {
    if values.is_empty() {
        return Err(AbcError::Parameter("posterior summary of an empty sample".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(PosteriorSummary { mean: mean(values), lower: percentile_sorted(&s, 2.5), upper: percentile_sorted(&s, 97.5) })
}

/// Mixing and cost summary of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub iat: Vec<f64>,
    pub ess: Vec<f64>,
    pub worst_iat: f64,
    pub worst_ess: f64,
    pub acceptance_rate: f64,
    pub wall_secs: f64,
    pub ess_per_minute: f64,
    pub n_retained: usize,
}

/// Diagnostics of `chain` after discarding `burn` records. A coordinate
/// that never moves gets an infinite IAT and zero ESS.
pub fn chain_diagnostics(chain: &Chain, burn: usize) -> Result<ChainDiagnostics> {
    if burn >= chain.len() {
        return Err(AbcError::Parameter(format!("burn-in {burn} leaves no draws out of {}", chain.len())));
    }
    let n = chain.len() - burn;
    let mut iats = Vec::with_capacity(chain.dim());
    for j in 0..chain.dim() {
        let v = match iat(&chain.coordinate(j, burn)) {
            Ok(t) => t,
            Err(AbcError::Degenerate(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        iats.push(v);
    }
    let ess: Vec<f64> = iats.iter().map(|&t| ess_from_iat(n, t)).collect();
    let worst_iat = iats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst_ess = ess.iter().copied().fold(f64::INFINITY, f64::min);
    let minutes = chain.elapsed_secs / 60.0;
    let ess_per_minute = if minutes > 0.0 { worst_ess / minutes } else { f64::INFINITY };
    let accepted = chain.records[burn..].iter().filter(|r| r.accepted).count();
    Ok(ChainDiagnostics {
        iat: iats,
        ess,
        worst_iat,
        worst_ess,
        acceptance_rate: accepted as f64 / n as f64,
        wall_secs: chain.elapsed_secs,
        ess_per_minute,
        n_retained: n,
    })
}

/// How many times more worst-case ESS per minute `a` delivers than `b`.
pub fn efficiency_ratio(a: &ChainDiagnostics, b: &ChainDiagnostics) -> f64 {
    a.ess_per_minute / b.ess_per_minute
}

/// Likelihood estimator evaluated by [`likelihood_curve`].
#[derive(Debug, Clone, PartialEq)]
pub enum CurveEstimator {
    /// Kernel average over `m` independent simulations.
    Mc { m: usize },
    /// Kernel average over `r` resamples of one simulation.
    Res { r: usize },
    /// Stratified estimate, recomputed until no stratum is empty.
    Strat { r1: usize, r2: usize, strata: StrataSpec, averaged: bool },
}

/// Give up on a stratified estimate after this many attempts.
pub const MAX_CURVE_ATTEMPTS: usize = 10_000;

/// Mean and nearest-rank 2.5% / 97.5% points of repeated log likelihood
/// estimates at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub theta: Vec<f64>,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Median number of attempts per finite estimate (1 unless stratified).
    pub median_attempts: f64,
}

/// One log likelihood estimate at `theta` with a fresh index matrix; returns
/// the estimate and the number of attempts it took.
pub fn log_likelihood_draw<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    theta: &[f64],
    est: &CurveEstimator,
    kernel: &KernelConfig,
    rng: &mut RandomStream,
) -> Result<(f64, usize)> {
    let n_s = model.n_summaries();
    match est {
        CurveEstimator::Mc { m } => {
            let mut set = Summaries::with_capacity(n_s, *m);
            for _ in 0..*m {
                set.push(&model.summarize(&model.simulate(theta, rng)?)?);
            }
            Ok((log_res_likelihood(&distances_to(&set, s_obs, &kernel.sigma)?, kernel).log_value, 1))
        }
        CurveEstimator::Res { r } => {
            let u = make_index_matrix(model.block_scheme(), model.data_shape(), *r, rng)?;
            let mut set = Summaries::with_capacity(n_s, *r);
            model.summarize_resamples(&model.simulate(theta, rng)?, &u, &mut set)?;
            Ok((log_res_likelihood(&distances_to(&set, s_obs, &kernel.sigma)?, kernel).log_value, 1))
        }
        CurveEstimator::Strat { r1, r2, strata, averaged } => {
            let (mut s1, mut s2) = (Summaries::with_capacity(n_s, *r1), Summaries::with_capacity(n_s, *r2));
            for attempt in 1..=MAX_CURVE_ATTEMPTS {
                let u1 = make_index_matrix(model.block_scheme(), model.data_shape(), *r1, rng)?;
                let u2 = make_index_matrix(model.block_scheme(), model.data_shape(), *r2, rng)?;
                s1.clear();
                s2.clear();
                model.summarize_resamples(&model.simulate(theta, rng)?, &u1, &mut s1)?;
                model.summarize_resamples(&model.simulate(theta, rng)?, &u2, &mut s2)?;
                let d1 = distances_to(&s1, s_obs, &kernel.sigma)?;
                let d2 = distances_to(&s2, s_obs, &kernel.sigma)?;
                let (e, _) = if *averaged {
                    log_averaged_strat_likelihood(&d1, &d2, strata, kernel)
                } else {
                    log_strat_likelihood(&d1, &d2, strata, kernel)
                };
                if !e.neglected_stratum {
                    return Ok((e.log_value, attempt));
                }
            }
            Err(AbcError::Degenerate(format!("every stratum filled in none of {MAX_CURVE_ATTEMPTS} attempts at {theta:?}")))
        }
    }
}

/// `reps` independent log likelihood estimates at every point of `thetas`
/// (sampling scale). Replicate `j` at point `i` draws from its own stream, so
/// the result does not depend on thread scheduling.
pub fn likelihood_curve<M: Model + ?Sized>(
    model: &M,
    s_obs: &[f64],
    thetas: &[Vec<f64>],
    est: &CurveEstimator,
    kernel: &KernelConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if reps == 0 {
        return Err(AbcError::Parameter("need at least one replicate".into()));
    }
    crate::error::check_len(model.n_summaries(), s_obs.len())?;
    thetas
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let draws: Vec<(f64, usize)> = (0..reps)
                .into_par_iter()
                .map(|j| log_likelihood_draw(model, s_obs, theta, est, kernel, &mut RandomStream::for_task(seed, &[i as u64, j as u64])))
                .collect::<Result<_>>()?;
            let logs: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let attempts: Vec<f64> = draws.iter().map(|d| d.1 as f64).collect();
            let mut sorted = logs.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(CurvePoint {
                theta: theta.clone(),
                mean: mean(&logs),
                lower: percentile_sorted(&sorted, 2.5),
                upper: percentile_sorted(&sorted, 97.5),
                median_attempts: median(&attempts),
            })
        })
        .collect()
}
