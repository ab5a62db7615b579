//! Stochastic Lotka-Volterra predator-prey model simulated exactly with the
//! Gillespie algorithm and summarised by nine time-series statistics.
//!
//! `X1` counts predators and `X2` prey. Reactions: prey birth at rate
//! `θ1 X2`, predation at `θ2 X1 X2` (`X1 + 1`, `X2 - 1`), predator death at
//! `θ3 X1`.

use crate::dataset::{Dataset, Shape};
use crate::error::{AbcError, Result};
use crate::models::prior::{Marginal, Prior};
use crate::models::Model;
use crate::resampling::BlockScheme;
use crate::rng::RandomStream;

/// Floor on sample variances before taking logs.
pub const LOG_VAR_FLOOR: f64 = 1e-12;

/// When a simulation stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LvStop {
    /// Run to `t_max`; a path that reaches `safety_cap` reactions first is
    /// frozen at its current state.
    TMax { t_max: f64, safety_cap: u64 },
    /// Run exactly this many reactions regardless of the time reached.
    Reactions(u64),
}

/// How the event path is read at observation times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// State at the last event not after the observation time.
    #[default]
    PiecewiseConstant,
    /// Straight line between the surrounding events.
    Linear,
}

/// Reaction hazards `(θ1 X2, θ2 X1 X2, θ3 X1)`.
#[inline]
pub fn lv_hazards(theta: &[f64; 3], x1: i64, x2: i64) -> [f64; 3] {
    let (a, b) = (x1 as f64, x2 as f64);
    [theta[0] * b, theta[1] * a * b, theta[2] * a]
}

const STOICH: [(i64, i64); 3] = [(0, 1), (1, -1), (-1, 0)];

/// A full event path with reaction tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct LvPath {
    pub times: Vec<f64>,
    pub x1: Vec<i64>,
    pub x2: Vec<i64>,
    pub births: u64,
    pub interactions: u64,
    pub deaths: u64,
    /// A jump drawn past `t_max` and not applied; kept for linear reads.
    pub overshoot: Option<(f64, i64, i64)>,
}

#[inline]
fn choose(h: &[f64; 3], total: f64, u: f64) -> usize {
    let target = u * total;
    if target < h[0] {
        0
    } else if target < h[0] + h[1] {
        1
    } else {
        2
    }
}

/// Exact simulation of the event path, starting at `t = 0`.
pub fn lv_gillespie(theta: &[f64; 3], x1_0: i64, x2_0: i64, stop: LvStop, rng: &mut RandomStream) -> Result<LvPath> {
    check_theta(theta, x1_0, x2_0)?;
    let mut p = LvPath {
        times: vec![0.0],
        x1: vec![x1_0],
        x2: vec![x2_0],
        births: 0,
        interactions: 0,
        deaths: 0,
        overshoot: None,
    };
    let (mut t, mut a, mut b) = (0.0, x1_0, x2_0);
    let mut count = 0u64;
    loop {
        match stop {
            LvStop::Reactions(d) if count >= d => break,
            LvStop::TMax { safety_cap, .. } if count >= safety_cap => break,
            _ => {}
        }
        let h = lv_hazards(theta, a, b);
        let total = h[0] + h[1] + h[2];
        if !(total > 0.0) {
            break;
        }
        let t_new = t + rng.exponential(total);
        let k = choose(&h, total, rng.uniform());
        let (na, nb) = (a + STOICH[k].0, b + STOICH[k].1);
        if let LvStop::TMax { t_max, .. } = stop {
            if t_new > t_max {
                p.overshoot = Some((t_new, na, nb));
                break;
            }
        }
        match k {
            0 => p.births += 1,
            1 => p.interactions += 1,
            _ => p.deaths += 1,
        }
        t = t_new;
        a = na;
        b = nb;
        count += 1;
        p.times.push(t);
        p.x1.push(a);
        p.x2.push(b);
    }
    Ok(p)
}

/// Reads a path at the given observation times.
pub fn lv_observe(path: &LvPath, obs_times: &[f64], interp: Interpolation) -> Dataset {
    let mut x1 = Vec::with_capacity(obs_times.len());
    let mut x2 = Vec::with_capacity(obs_times.len());
    let n = path.times.len();
    let mut i = 0;
    for &tau in obs_times {
        while i + 1 < n && path.times[i + 1] <= tau {
            i += 1;
        }
        let (a0, b0) = (path.x1[i] as f64, path.x2[i] as f64);
        let next = if i + 1 < n {
            Some((path.times[i + 1], path.x1[i + 1], path.x2[i + 1]))
        } else {
            path.overshoot.filter(|o| tau < o.0)
        };
        let (va, vb) = match (interp, next) {
            (Interpolation::Linear, Some((t1, a1, b1))) => {
                let w = (tau - path.times[i]) / (t1 - path.times[i]);
                (a0 + (a1 as f64 - a0) * w, b0 + (b1 as f64 - b0) * w)
            }
            _ => (a0, b0),
        };
        x1.push(va);
        x2.push(vb);
    }
    Dataset::Series { x1, x2, times: obs_times.to_vec() }
}

/// Simulates and observes in one pass without storing the event path.
/// Produces the same values as [`lv_gillespie`] followed by [`lv_observe`].
pub fn lv_simulate_observed(
    theta: &[f64; 3],
    x1_0: i64,
    x2_0: i64,
    stop: LvStop,
    obs_times: &[f64],
    interp: Interpolation,
    rng: &mut RandomStream,
) -> Result<Dataset> {
    check_theta(theta, x1_0, x2_0)?;
    let n = obs_times.len();
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    let (mut t, mut a, mut b) = (0.0, x1_0, x2_0);
    let mut count = 0u64;
    loop {
        match stop {
            LvStop::Reactions(d) if count >= d => break,
            LvStop::TMax { safety_cap, .. } if count >= safety_cap => break,
            // later events cannot change any observation
            LvStop::TMax { .. } if y1.len() == n => break,
            _ => {}
        }
        let h = lv_hazards(theta, a, b);
        let total = h[0] + h[1] + h[2];
        if !(total > 0.0) {
            break;
        }
        let t_new = t + rng.exponential(total);
        let k = choose(&h, total, rng.uniform());
        let (na, nb) = (a + STOICH[k].0, b + STOICH[k].1);
        while y1.len() < n && obs_times[y1.len()] < t_new {
            let tau = obs_times[y1.len()];
            match interp {
                Interpolation::PiecewiseConstant => {
                    y1.push(a as f64);
                    y2.push(b as f64);
                }
                Interpolation::Linear => {
                    let w = (tau - t) / (t_new - t);
                    y1.push(a as f64 + (na - a) as f64 * w);
                    y2.push(b as f64 + (nb - b) as f64 * w);
                }
            }
        }
        if let LvStop::TMax { t_max, .. } = stop {
            if t_new > t_max {
                break;
            }
        }
        t = t_new;
        a = na;
        b = nb;
        count += 1;
    }
    while y1.len() < n {
        y1.push(a as f64);
        y2.push(b as f64);
    }
    Ok(Dataset::Series { x1: y1, x2: y2, times: obs_times.to_vec() })
}

fn check_theta(theta: &[f64; 3], x1_0: i64, x2_0: i64) -> Result<()> {
    if theta.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AbcError::Parameter(format!("rates must be finite and non-negative, got {theta:?}")));
    }
    if x1_0 < 0 || x2_0 < 0 {
        return Err(AbcError::Parameter("initial populations must be non-negative".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Biased (divide-by-`n`) lag-`k` autocorrelation; `0` for a constant series.
fn autocorr(x: &[f64], m: f64, k: usize) -> f64 {
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 0.0 || k >= x.len() {
        return 0.0;
    }
    let num: f64 = x.windows(k + 1).map(|w| (w[0] - m) * (w[k] - m)).sum();
    num / denom
}

/// `(mean₁, mean₂, log var₁, log var₂, ρ₁(1), ρ₁(2), ρ₂(1), ρ₂(2), corr(x₁, x₂))`.
pub fn lv_summaries(x1: &[f64], x2: &[f64]) -> Result<[f64; 9]> {
    if x1.len() != x2.len() || x1.len() < 3 {
        return Err(AbcError::Data("series must have equal length of at least 3".into()));
    }
    let n = x1.len() as f64;
    let (m1, m2) = (mean(x1), mean(x2));
    let ss1: f64 = x1.iter().map(|v| (v - m1) * (v - m1)).sum();
    let ss2: f64 = x2.iter().map(|v| (v - m2) * (v - m2)).sum();
    let lv1 = (ss1 / (n - 1.0)).max(LOG_VAR_FLOOR).ln();
    let lv2 = (ss2 / (n - 1.0)).max(LOG_VAR_FLOOR).ln();
    let cross = if ss1 > 0.0 && ss2 > 0.0 {
        x1.iter().zip(x2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / (ss1 * ss2).sqrt()
    } else {
        0.0
    };
    Ok([
        m1,
        m2,
        lv1,
        lv2,
        autocorr(x1, m1, 1),
        autocorr(x1, m1, 2),
        autocorr(x2, m2, 1),
        autocorr(x2, m2, 2),
        cross,
    ])
}

/// Lotka-Volterra model with `log θ_j ~ U(lo, hi)`.
#[derive(Debug, Clone)]
pub struct LvModel {
    x1_0: i64,
    x2_0: i64,
    obs_times: Vec<f64>,
    stop: LvStop,
    interp: Interpolation,
    block_len: usize,
    prior: Prior,
}

impl LvModel {
    pub fn new(
        x1_0: i64,
        x2_0: i64,
        obs_times: Vec<f64>,
        stop: LvStop,
        interp: Interpolation,
        block_len: usize,
        prior_lo: f64,
        prior_hi: f64,
    ) -> Result<Self> {
        if obs_times.len() < 3 || obs_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AbcError::Parameter("observation times must be increasing, at least 3".into()));
        }
        BlockScheme::TimeBlocks { block_len, overlapping: false }.units(Shape::Len(obs_times.len()))?;
        let prior = Prior::new(
            ["theta1", "theta2", "theta3"].iter().map(|s| s.to_string()).collect(),
            vec![Marginal::Uniform { lo: prior_lo, hi: prior_hi }; 3],
            vec![true; 3],
        )?;
        Ok(Self { x1_0, x2_0, obs_times, stop, interp, block_len, prior })
    }

    /// Start `(50, 100)`, observations every 2 time units from 0 to 62,
    /// run to `t = 64`, blocks of 8, `log θ_j ~ U(-6, 2)`.
    pub fn reference() -> Self {
        Self::new(
            50,
            100,
            reference_obs_times(),
            LvStop::TMax { t_max: 64.0, safety_cap: DEFAULT_SAFETY_CAP },
            Interpolation::PiecewiseConstant,
            8,
            -6.0,
            2.0,
        )
        .expect("valid reference settings")
    }

    pub fn with_stop(mut self, stop: LvStop) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_interpolation(mut self, interp: Interpolation) -> Self {
        self.interp = interp;
        self
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    pub fn stop(&self) -> LvStop {
        self.stop
    }

    pub fn initial_state(&self) -> (i64, i64) {
        (self.x1_0, self.x2_0)
    }

    /// Simulation at natural-scale rates.
    pub fn simulate_natural(&self, theta: &[f64; 3], rng: &mut RandomStream) -> Result<Dataset> {
        lv_simulate_observed(theta, self.x1_0, self.x2_0, self.stop, &self.obs_times, self.interp, rng)
    }
}

/// Reaction cap guarding `t_max` runs against explosive prey growth.
pub const DEFAULT_SAFETY_CAP: u64 = 100_000;

/// Reaction count of the expensive fixed-reaction variant.
pub const EXPENSIVE_REACTIONS: u64 = 124_001;

/// `0, 2, ..., 62`.
pub fn reference_obs_times() -> Vec<f64> {
    (0..32).map(|i| 2.0 * i as f64).collect()
}

impl Model for LvModel {
    fn name(&self) -> &str {
        "lotka_volterra"
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn n_summaries(&self) -> usize {
        9
    }

    fn data_shape(&self) -> Shape {
        Shape::Len(self.obs_times.len())
    }

    fn block_scheme(&self) -> BlockScheme {
        BlockScheme::TimeBlocks { block_len: self.block_len, overlapping: false }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Dataset> {
        let t = self.prior.to_natural(theta);
        self.simulate_natural(&[t[0], t[1], t[2]], rng)
    }

    fn summarize(&self, x: &Dataset) -> Result<Vec<f64>> {
        let (a, b) = x.as_series()?;
        Ok(lv_summaries(a, b)?.to_vec())
    }

    /// Only draws with both populations alive at the last observation. Most
    /// prior draws go extinct early and share one constant series, which
    /// drives the MAD of several summaries to zero.
    fn pilot_keep(&self, x: &Dataset) -> bool {
        match x.as_series() {
            Ok((a, b)) => a.last().is_some_and(|&v| v > 0.0) && b.last().is_some_and(|&v| v > 0.0),
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TRUTH: [f64; 3] = [1.0, 0.005, 0.6];

    #[test]
    fn pilot_keeps_only_surviving_series() {
        let m = LvModel::reference();
        let alive = Dataset::series(vec![100.0; 32], vec![50.0; 32], reference_obs_times()).unwrap();
        let dead = Dataset::series(vec![0.0; 32], vec![50.0; 32], reference_obs_times()).unwrap();
        assert!(m.pilot_keep(&alive));
        assert!(!m.pilot_keep(&dead));
    }

    #[test]
    fn hazards_example() {
        let h = lv_hazards(&TRUTH, 50, 100);
        assert_relative_eq!(h[0], 100.0);
        assert_relative_eq!(h[1], 25.0, max_relative = 1e-14);
        assert_relative_eq!(h[2], 30.0, max_relative = 1e-14);
        assert_relative_eq!(h.iter().sum::<f64>(), 155.0, max_relative = 1e-14);
    }

    #[test]
    fn pure_birth_mean_growth() {
        let theta = [0.5, 0.0, 0.0];
        let (t_obs, reps) = (2.0, 10_000);
        let stop = LvStop::TMax { t_max: 2.5, safety_cap: u64::MAX };
        let mut vals = Vec::with_capacity(reps);
        for i in 0..reps {
            let mut rng = RandomStream::for_task(17, &[i as u64]);
            let x = lv_simulate_observed(&theta, 0, 10, stop, &[0.0, 1.0, t_obs], Interpolation::PiecewiseConstant, &mut rng).unwrap();
            vals.push(x.as_series().unwrap().1[2]);
        }
        let m = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let expected = 10.0 * (0.5 * t_obs).exp();
        assert!((m - expected).abs() < 3.0 * (var / reps as f64).sqrt(), "{m} vs {expected}");
    }

    #[test]
    fn reaction_bookkeeping() {
        let stop = LvStop::TMax { t_max: 64.0, safety_cap: DEFAULT_SAFETY_CAP };
        let p = lv_gillespie(&TRUTH, 50, 100, stop, &mut RandomStream::new(5, 0)).unwrap();
        let (a, b) = (*p.x1.last().unwrap(), *p.x2.last().unwrap());
        assert_eq!(b, 100 + p.births as i64 - p.interactions as i64);
        assert_eq!(a, 50 + p.interactions as i64 - p.deaths as i64);
        assert!(p.times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn streaming_matches_path_then_observe() {
        let times = reference_obs_times();
        for interp in [Interpolation::PiecewiseConstant, Interpolation::Linear] {
            for (seed, stop) in [
                (1, LvStop::TMax { t_max: 64.0, safety_cap: DEFAULT_SAFETY_CAP }),
                (2, LvStop::Reactions(3000)),
                (3, LvStop::TMax { t_max: 64.0, safety_cap: 500 }),
            ] {
                let path = lv_gillespie(&TRUTH, 50, 100, stop, &mut RandomStream::new(seed, 0)).unwrap();
                let a = lv_observe(&path, &times, interp);
                let b = lv_simulate_observed(&TRUTH, 50, 100, stop, &times, interp, &mut RandomStream::new(seed, 0)).unwrap();
                assert_eq!(a, b, "{interp:?} {stop:?}");
            }
        }
    }

    #[test]
    fn extinction_freezes_state() {
        let x = lv_simulate_observed(&[1.0, 0.0, 1.0], 0, 0, LvStop::TMax { t_max: 64.0, safety_cap: 10 }, &reference_obs_times(), Interpolation::PiecewiseConstant, &mut RandomStream::new(1, 1)).unwrap();
        let (a, b) = x.as_series().unwrap();
        assert!(a.iter().chain(b).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_series_summaries() {
        let s = lv_summaries(&[3.0; 32], &[7.0; 32]).unwrap();
        assert_eq!(s[0], 3.0);
        assert_eq!(s[1], 7.0);
        assert_eq!(s[2], LOG_VAR_FLOOR.ln());
        assert_eq!(&s[4..], &[0.0; 5]);
    }

    #[test]
    fn summaries_by_hand() {
        let x1 = [1.0, 2.0, 3.0, 4.0];
        let x2 = [4.0, 3.0, 2.0, 1.0];
        let s = lv_summaries(&x1, &x2).unwrap();
        // deviations (-1.5, -0.5, 0.5, 1.5), sum of squares 5
        assert_eq!(s[0], 2.5);
        assert_relative_eq!(s[2], (5.0f64 / 3.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(s[4], (0.75 - 0.25 + 0.75) / 5.0, max_relative = 1e-14);
        assert_relative_eq!(s[5], (-0.75 - 0.75) / 5.0, max_relative = 1e-14);
        assert_relative_eq!(s[8], -1.0, max_relative = 1e-14);
    }

    #[test]
    fn reference_run_is_oscillating_and_finite() {
        let m = LvModel::reference();
        let theta = m.prior().to_sampling(&TRUTH);
        let x = m.simulate(&theta, &mut RandomStream::new(8, 0)).unwrap();
        let s = m.summarize(&x).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s.iter().all(|v| v.is_finite()));
    }
}
