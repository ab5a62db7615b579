//! ABC sequential Monte Carlo with ESS-controlled thresholds.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{AbcError, Result};
use crate::kernels::{finite_distance, KernelKind, ScalingMatrix, Summaries};
use crate::models::{Model, Prior};
use crate::rng::RandomStream;

/// Lower end of the threshold bracket.
pub const DELTA_FLOOR: f64 = f64::EPSILON;

/// Relative width at which bisection stops.
pub const BISECTION_TOL: f64 = 1e-10;

/// Weighted particles with their summaries and distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePopulation {
    /// Parameters on the sampling scale.
    pub particles: Vec<Vec<f64>>,
    pub summaries: Summaries,
    pub distances: Vec<f64>,
    /// Normalized weights.
    pub weights: Vec<f64>,
    /// Threshold the weights target; infinite for the initial population.
    pub delta: f64,
    pub iteration: usize,
}

impl ParticlePopulation {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.weights)
    }

    /// Weighted mean of coordinate `j`.
    pub fn weighted_mean(&self, j: usize) -> f64 {
        self.particles.iter().zip(&self.weights).map(|(p, w)| w * p[j]).sum()
    }

    /// Weighted variance of coordinate `j` (weights sum to one).
    pub fn weighted_variance(&self, j: usize) -> f64 {
        let m = self.weighted_mean(j);
        self.particles.iter().zip(&self.weights).map(|(p, w)| w * (p[j] - m).powi(2)).sum()
    }

    /// Coordinate `j` of every particle.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p[j]).collect()
    }

    fn check(&self) -> Result<()> {
        let n = self.particles.len();
        crate::error::check_len(n, self.weights.len())?;
        crate::error::check_len(n, self.distances.len())?;
        crate::error::check_len(n, self.summaries.len())
    }
}

/// Inverse sum of squared normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| *w < 0.0 || w.is_nan()) {
        return Err(AbcError::Parameter("weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(AbcError::Degenerate("all weights are zero".into()));
    }
    Ok(1.0 / weights.iter().map(|w| (w / total).powi(2)).sum::<f64>())
}

/// Log weight factor `K_δ(d) / K_δold(d)` up to a constant.
fn log_kernel_ratio(kind: KernelKind, d: f64, delta: f64, delta_old: f64) -> f64 {
    match kind {
        KernelKind::Gaussian => {
            let old = if delta_old.is_finite() { 1.0 / (delta_old * delta_old) } else { 0.0 };
            -0.5 * d * d * (1.0 / (delta * delta) - old)
        }
        KernelKind::Indicator => {
            if d < delta {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Weights after moving the threshold from `delta_old` to `delta`, normalized.
pub fn reweight(weights: &[f64], distances: &[f64], kind: KernelKind, delta: f64, delta_old: f64) -> Result<Vec<f64>> {
    crate::error::check_len(weights.len(), distances.len())?;
    let logs: Vec<f64> = weights
        .iter()
        .zip(distances)
        .map(|(w, d)| if *w > 0.0 { w.ln() + log_kernel_ratio(kind, *d, delta, delta_old) } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(AbcError::Degenerate(format!("every weight vanished at δ = {delta}")));
    }
    let un: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = un.iter().sum();
    Ok(un.into_iter().map(|w| w / total).collect())
}

/// Outcome of the threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweighted {
    pub delta: f64,
    pub weights: Vec<f64>,
    /// No threshold in the bracket reached the target ESS; `δ` and the
    /// weights were kept.
    pub fallback: bool,
}

/// Finds `δ` in `[DELTA_FLOOR, δ_old]` with `ESS(w(δ)) = γ·ESS(w_old)` by
/// bisection, returning the upper end of the final bracket and the
/// reweighted population. An infinite `δ_old` is replaced by
/// `1000·max(d)` as the bracket top.
pub fn reweight_solve_delta(pop: &ParticlePopulation, gamma: f64, kind: KernelKind) -> Result<Reweighted> {
    pop.check()?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(AbcError::Parameter(format!("γ = {gamma} outside (0, 1]")));
    }
    let keep = || Reweighted { delta: pop.delta, weights: pop.weights.clone(), fallback: false };
    if gamma == 1.0 {
        return Ok(keep());
    }
    let target = gamma * ess(&pop.weights)?;
    let h = |delta: f64| -> f64 {
        match reweight(&pop.weights, &pop.distances, kind, delta, pop.delta) {
            Ok(w) => ess(&w).unwrap_or(0.0) - target,
            Err(_) => -target,
        }
    };
    let top = if pop.delta.is_finite() {
        pop.delta
    } else {
        let max_d = pop.distances.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        1e3 * max_d.max(DELTA_FLOOR)
    };
    if h(DELTA_FLOOR) > 0.0 {
        return Ok(Reweighted { fallback: true, ..keep() });
    }
    let (mut lo, mut hi) = (DELTA_FLOOR, top);
    while hi - lo > BISECTION_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi == pop.delta {
        return Ok(keep());
    }
    let weights = reweight(&pop.weights, &pop.distances, kind, hi, pop.delta)?;
    Ok(Reweighted { delta: hi, weights, fallback: false })
}

/// Multinomial resampling when `ESS < e_min`; weights reset to `1/N`.
/// Returns whether resampling took place.
pub fn resample_particles(pop: &mut ParticlePopulation, e_min: f64, rng: &mut RandomStream) -> Result<bool> {
    pop.check()?;
    if ess(&pop.weights)? >= e_min {
        return Ok(false);
    }
    let n = pop.len();
    let dist = WeightedIndex::new(&pop.weights).map_err(|e| AbcError::Degenerate(format!("cannot resample: {e}")))?;
    let picks: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
    let mut summaries = Summaries::with_capacity(pop.summaries.dim(), n);
    for &i in &picks {
        summaries.push(pop.summaries.row(i));
    }
    pop.particles = picks.iter().map(|&i| pop.particles[i].clone()).collect();
    pop.distances = picks.iter().map(|&i| pop.distances[i]).collect();
    pop.summaries = summaries;
    pop.weights = vec![1.0 / n as f64; n];
    Ok(true)
}

/// Log acceptance ratio of a move: kernel ratio at fixed `δ` times the
/// prior ratio.
pub fn move_log_ratio(kind: KernelKind, d_new: f64, d_old: f64, delta: f64, log_prior_new: f64, log_prior_old: f64) -> f64 {
    if log_prior_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let k = match kind {
        KernelKind::Gaussian if delta.is_finite() => -0.5 * (d_new * d_new - d_old * d_old) / (delta * delta),
        KernelKind::Gaussian => 0.0,
        KernelKind::Indicator => {
            if d_new < delta {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
    };
    if k == f64::NEG_INFINITY {
        return k;
    }
    k + log_prior_new - log_prior_old
}

/// One MH move per positive-weight particle with a Gaussian random walk of
/// covariance `2·diag(weighted variance)`. Particle `i` uses its own stream
/// derived from a value drawn from `rng`, so the result does not depend on
/// thread scheduling. Returns the acceptance rate among moved particles and
/// the number of simulations.
pub fn move_step<M: Model + ?Sized>(
    pop: &mut ParticlePopulation,
    model: &M,
    s_obs: &[f64],
    sigma: &ScalingMatrix,
    kind: KernelKind,
    rng: &mut RandomStream,
) -> Result<(f64, u64)> {
    pop.check()?;
    let prior = model.prior();
    let p = prior.dim();
    let sd: Vec<f64> = (0..p).map(|j| (2.0 * pop.weighted_variance(j)).max(0.0).sqrt()).collect();
    let base = rng.next_u64();
    let gen = pop.iteration as u64;
    let delta = pop.delta;
    crate::error::check_len(sigma.dim(), s_obs.len())?;
    let results: Vec<Result<Option<(Vec<f64>, Vec<f64>, f64, bool)>>> = (0..pop.len())
        .into_par_iter()
        .map(|i| {
            if pop.weights[i] <= 0.0 {
                return Ok(None);
            }
            let mut r = RandomStream::for_task(base, &[gen, i as u64]);
            let theta = &pop.particles[i];
            let prop: Vec<f64> = theta.iter().zip(&sd).map(|(t, s)| t + s * r.standard_normal()).collect();
            let lp_new = prior.log_density(&prop);
            if lp_new == f64::NEG_INFINITY {
                return Ok(Some((prop, Vec::new(), f64::NAN, false)));
            }
            let x = model.simulate(&prop, &mut r)?;
            let s = model.summarize(&x)?;
            let d = finite_distance(sigma, &s, s_obs);
            let log_alpha = move_log_ratio(kind, d, pop.distances[i], delta, lp_new, prior.log_density(theta));
            let accept = log_alpha >= 0.0 || (log_alpha > f64::NEG_INFINITY && r.uniform().ln() < log_alpha);
            Ok(Some((prop, s, d, accept)))
        })
        .collect();
    let (mut attempted, mut accepted, mut sims) = (0usize, 0usize, 0u64);
    let mut summaries = pop.summaries.clone();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let Some((prop, s, d, accept)) = res? else { continue };
        attempted += 1;
        if !s.is_empty() {
            sims += 1;
        }
        if accept {
            accepted += 1;
            pop.particles[i] = prop;
            pop.distances[i] = d;
            rows.push((i, s));
        }
    }
    if !rows.is_empty() {
        let mut rebuilt = Summaries::with_capacity(summaries.dim(), pop.len());
        let mut next = rows.into_iter().peekable();
        for i in 0..pop.len() {
            match next.peek() {
                Some((j, s)) if *j == i => {
                    rebuilt.push(s);
                    next.next();
                }
                _ => rebuilt.push(summaries.row(i)),
            }
        }
        summaries = rebuilt;
    }
    pop.summaries = summaries;
    let rate = if attempted == 0 { 0.0 } else { accepted as f64 / attempted as f64 };
    Ok((rate, sims))
}

/// Run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SmcSettings {
    pub n_particles: usize,
    pub gamma: f64,
    /// Resampling takes place when the ESS falls below this value.
    pub ess_min: f64,
    /// The run stops once the move acceptance rate drops below this value.
    pub stop_rate: f64,
    pub kernel: KernelKind,
    pub sigma: ScalingMatrix,
    /// Upper bound on the number of iterations.
    pub max_iter: usize,
    /// Initial sampler; the prior when absent. Initial weights are
    /// `π(θ)/q(θ)`.
    pub initial: Option<Prior>,
}

impl SmcSettings {
    /// `E = N/2`, `max_iter = 1000`, Gaussian kernel.
    pub fn new(n_particles: usize, gamma: f64, stop_rate: f64, sigma: ScalingMatrix) -> Self {
        Self {
            n_particles,
            gamma,
            ess_min: n_particles as f64 / 2.0,
            stop_rate,
            kernel: KernelKind::Gaussian,
            sigma,
            max_iter: 1000,
            initial: None,
        }
    }
}

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct SmcGeneration {
    pub iteration: usize,
    pub delta: f64,
    pub ess_after_reweight: f64,
    pub resampled: bool,
    pub acceptance: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmcStop {
    /// Move acceptance rate fell below the stop rate.
    LowAcceptance,
    /// Two consecutive threshold searches found no root.
    NoProgress,
    MaxIterations,
}

/// Output population with its history.
#[derive(Debug, Clone, PartialEq)]
pub struct SmcRun {
    pub population: ParticlePopulation,
    pub trace: Vec<SmcGeneration>,
    pub stop: SmcStop,
    pub n_simulations: u64,
    pub elapsed_secs: f64,
}

/// Full ABC-SMC loop: reweight with a new threshold, resample if the ESS is
/// low, move. When the move acceptance rate drops below the stop rate the
/// population from the previous iteration is returned.
pub fn run_abc_smc<M: Model + ?Sized>(model: &M, s_obs: &[f64], cfg: &SmcSettings, rng: &mut RandomStream) -> Result<SmcRun> {
    run_abc_smc_with(model, s_obs, cfg, rng, |_| {})
}

/// [`run_abc_smc`] calling `observe` on the population after every move step.
pub fn run_abc_smc_with<M, F>(model: &M, s_obs: &[f64], cfg: &SmcSettings, rng: &mut RandomStream, mut observe: F) -> Result<SmcRun>
where
    M: Model + ?Sized,
    F: FnMut(&ParticlePopulation),
{
    let n = cfg.n_particles;
    if n < 2 {
        return Err(AbcError::Parameter("need at least 2 particles".into()));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(AbcError::Parameter(format!("γ = {} outside (0, 1)", cfg.gamma)));
    }
    if !(0.0..=1.0).contains(&cfg.stop_rate) {
        return Err(AbcError::Parameter(format!("stop rate {} outside [0, 1]", cfg.stop_rate)));
    }
    let n_s = model.n_summaries();
    crate::error::check_len(n_s, s_obs.len())?;
    crate::error::check_len(n_s, cfg.sigma.dim())?;
    let prior = model.prior();
    if let Some(q) = &cfg.initial {
        crate::error::check_len(prior.dim(), q.dim())?;
    }
    let start = std::time::Instant::now();

    let base = rng.next_u64();
    let init: Vec<Result<(Vec<f64>, Vec<f64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = RandomStream::for_task(base, &[0, i as u64]);
            let theta = cfg.initial.as_ref().unwrap_or(prior).sample(&mut r);
            let log_w = match &cfg.initial {
                Some(q) => prior.log_density(&theta) - q.log_density(&theta),
                None => 0.0,
            };
            let x = model.simulate(&theta, &mut r)?;
            let s = model.summarize(&x)?;
            Ok((theta, s, log_w))
        })
        .collect();
    let mut particles = Vec::with_capacity(n);
    let mut summaries = Summaries::with_capacity(n_s, n);
    let mut log_w = Vec::with_capacity(n);
    for r in init {
        let (t, s, lw) = r?;
        particles.push(t);
        summaries.push(&s);
        log_w.push(lw);
    }
    let distances = (0..n).map(|i| finite_distance(&cfg.sigma, summaries.row(i), s_obs)).collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(AbcError::Degenerate("initial weights are all zero".into()));
    }
    let un: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = un.iter().sum();
    let mut pop = ParticlePopulation {
        particles,
        summaries,
        distances,
        weights: un.into_iter().map(|w| w / total).collect(),
        delta: f64::INFINITY,
        iteration: 0,
    };
    let mut n_simulations = n as u64;
    let mut trace = Vec::new();
    let mut fallbacks = 0;

    for l in 1..=cfg.max_iter {
        let previous = pop.clone();
        let rw = reweight_solve_delta(&pop, cfg.gamma, cfg.kernel)?;
        fallbacks = if rw.fallback { fallbacks + 1 } else { 0 };
        if fallbacks >= 2 {
            log::warn!("no threshold reduction possible in two consecutive iterations; stopping at δ = {}", pop.delta);
            return Ok(SmcRun { population: previous, trace, stop: SmcStop::NoProgress, n_simulations, elapsed_secs: start.elapsed().as_secs_f64() });
        }
        if rw.fallback {
            log::warn!("iteration {l}: ESS target unreachable, keeping δ = {}", pop.delta);
        }
        pop.delta = rw.delta;
        pop.weights = rw.weights;
        pop.iteration = l;
        let ess_after = ess(&pop.weights)?;
        let resampled = resample_particles(&mut pop, cfg.ess_min, rng)?;
        let (acceptance, sims) = move_step(&mut pop, model, s_obs, &cfg.sigma, cfg.kernel, rng)?;
        n_simulations += sims;
        trace.push(SmcGeneration { iteration: l, delta: pop.delta, ess_after_reweight: ess_after, resampled, acceptance, fallback: rw.fallback });
        log::debug!("smc iteration {l}: δ = {:.6}, ESS = {ess_after:.1}, acceptance = {acceptance:.4}", pop.delta);
        observe(&pop);
        if acceptance < cfg.stop_rate {
            return Ok(SmcRun { population: previous, trace, stop: SmcStop::LowAcceptance, n_simulations, elapsed_secs: start.elapsed().as_secs_f64() });
        }
    }
    Ok(SmcRun { population: pop, trace, stop: SmcStop::MaxIterations, n_simulations, elapsed_secs: start.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Shape};
    use crate::models::gaussian::{gaussian_exact_posterior, GaussianModel};
    use crate::models::Marginal;
    use crate::resampling::BlockScheme;
    use proptest::prelude::*;

    fn population(distances: Vec<f64>, weights: Vec<f64>, delta: f64) -> ParticlePopulation {
        let n = distances.len();
        ParticlePopulation {
            particles: (0..n).map(|i| vec![i as f64]).collect(),
            summaries: Summaries::from_rows(1, distances.clone()).unwrap(),
            distances,
            weights,
            delta,
            iteration: 1,
        }
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&[1.0; 1000]).unwrap() - 1000.0).abs() < 1e-9);
        assert_eq!(ess(&[0.0, 3.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ess(&[0.5, 0.5, 0.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(ess(&[0.0, 0.0]), Err(AbcError::Degenerate(_))));
    }

    #[test]
    fn gamma_one_keeps_everything() {
        let pop = population(vec![0.1, 0.5, 0.9], vec![0.2, 0.3, 0.5], 2.0);
        let r = reweight_solve_delta(&pop, 1.0, KernelKind::Gaussian).unwrap();
        assert_eq!(r.delta, 2.0);
        assert_eq!(r.weights, pop.weights);
    }

    #[test]
    fn equal_distances_leave_no_root() {
        let pop = population(vec![0.4; 10], vec![0.1; 10], 2.0);
        let r = reweight_solve_delta(&pop, 0.5, KernelKind::Gaussian).unwrap();
        assert!(r.fallback);
        assert_eq!(r.delta, 2.0);
        assert_eq!(r.weights, pop.weights);
    }

    #[test]
    fn bisection_matches_grid_search() {
        let mut rng = RandomStream::new(21, 0);
        let d: Vec<f64> = (0..200).map(|_| rng.exponential(1.0)).collect();
        let w: Vec<f64> = (0..200).map(|_| rng.uniform() + 0.1).collect();
        let total: f64 = w.iter().sum();
        let pop = population(d.clone(), w.iter().map(|x| x / total).collect(), 3.0);
        let gamma = 0.8;
        let r = reweight_solve_delta(&pop, gamma, KernelKind::Gaussian).unwrap();
        let target = gamma * ess(&pop.weights).unwrap();
        // smallest grid δ whose ESS stays above target
        let grid = 10_000;
        let step = 3.0 / grid as f64;
        let ess_at = |delta: f64| ess(&reweight(&pop.weights, &d, KernelKind::Gaussian, delta, 3.0).unwrap()).unwrap();
        let oracle = (1..=grid).map(|k| k as f64 * step).find(|&x| ess_at(x) >= target).unwrap();
        assert!((r.delta - oracle).abs() <= step, "{} vs {oracle}", r.delta);
        assert!((ess(&r.weights).unwrap() / target - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infinite_previous_threshold_uses_distance_bracket() {
        let mut rng = RandomStream::new(22, 0);
        let d: Vec<f64> = (0..100).map(|_| rng.uniform()).collect();
        let pop = population(d, vec![0.01; 100], f64::INFINITY);
        let r = reweight_solve_delta(&pop, 0.9, KernelKind::Gaussian).unwrap();
        assert!(r.delta.is_finite() && r.delta > 0.0);
        assert!((ess(&r.weights).unwrap() - 90.0).abs() < 1e-4);
    }

    #[test]
    fn resampling_below_threshold_only() {
        let mut pop = population(vec![0.1, 0.2, 0.3, 0.4], vec![0.25; 4], 1.0);
        let before = pop.clone();
        let mut rng = RandomStream::new(23, 0);
        assert!(!resample_particles(&mut pop, 2.0, &mut rng).unwrap());
        assert_eq!(pop, before);
        let mut pop = population(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 1.0, 0.0, 0.0], 1.0);
        assert!(resample_particles(&mut pop, 2.0, &mut rng).unwrap());
        assert!(pop.particles.iter().all(|p| p[0] == 1.0));
        assert!(pop.distances.iter().all(|&d| d == 0.2));
        assert_eq!(pop.weights, vec![0.25; 4]);
    }

    #[test]
    fn resampled_counts_match_multinomial() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let trials = 10_000;
        let mut counts = [0usize; 4];
        let mut rng = RandomStream::new(24, 0);
        for _ in 0..trials {
            let mut pop = population(vec![0.0, 1.0, 2.0, 3.0], w.to_vec(), 1.0);
            resample_particles(&mut pop, 10.0, &mut rng).unwrap();
            for p in &pop.particles {
                counts[p[0] as usize] += 1;
            }
        }
        let total = (trials * 4) as f64;
        for k in 0..4 {
            let se = (total * w[k] * (1.0 - w[k])).sqrt();
            assert!((counts[k] as f64 - total * w[k]).abs() < 3.0 * se, "ancestor {k}: {}", counts[k]);
        }
    }

    #[test]
    fn move_ratio_examples() {
        assert_eq!(move_log_ratio(KernelKind::Gaussian, 0.3, 0.3, 1.0, -1.0, -1.0), 0.0);
        assert_eq!(move_log_ratio(KernelKind::Gaussian, 0.1, 0.3, 1.0, f64::NEG_INFINITY, -1.0), f64::NEG_INFINITY);
        assert_eq!(move_log_ratio(KernelKind::Indicator, 2.0, 0.3, 1.0, 0.0, 0.0), f64::NEG_INFINITY);
    }

    /// Summary is `a` or `b` with equal probability, whatever `θ`.
    struct Coin {
        prior: Prior,
        a: f64,
        b: f64,
    }

    impl Model for Coin {
        fn name(&self) -> &str {
            "coin"
        }
        fn prior(&self) -> &Prior {
            &self.prior
        }
        fn n_summaries(&self) -> usize {
            1
        }
        fn data_shape(&self) -> Shape {
            Shape::Len(1)
        }
        fn block_scheme(&self) -> BlockScheme {
            BlockScheme::Iid
        }
        fn simulate(&self, _theta: &[f64], rng: &mut RandomStream) -> Result<Dataset> {
            Ok(Dataset::Scalar(vec![if rng.uniform() < 0.5 { self.a } else { self.b }]))
        }
        fn summarize(&self, x: &Dataset) -> Result<Vec<f64>> {
            Ok(x.as_scalar()?.to_vec())
        }
    }

    #[test]
    fn frozen_move_matches_analytic_acceptance() {
        let prior = Prior::new(vec!["t".into()], vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }], vec![false]).unwrap();
        let model = Coin { prior, a: 0.5, b: 1.0 };
        let sigma = ScalingMatrix::identity(1);
        let delta = 0.8;
        let frozen = ParticlePopulation {
            particles: vec![vec![0.0]],
            summaries: Summaries::from_rows(1, vec![0.5]).unwrap(),
            distances: vec![0.5],
            weights: vec![1.0],
            delta,
            iteration: 3,
        };
        let expected = 0.5 + 0.5 * (-(1.0f64 - 0.25) / (2.0 * delta * delta)).exp();
        let mut rng = RandomStream::new(25, 0);
        let trials = 20_000;
        let mut hits = 0.0;
        for _ in 0..trials {
            let mut pop = frozen.clone();
            hits += move_step(&mut pop, &model, &[0.0], &sigma, KernelKind::Gaussian, &mut rng).unwrap().0;
        }
        let f = hits / trials as f64;
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((f - expected).abs() < 3.0 * se, "{f} vs {expected}");
    }

    #[test]
    fn stop_rate_one_returns_initial_population() {
        let m = GaussianModel::new(50, 0.0, 1.0).unwrap();
        let cfg = SmcSettings::new(64, 0.9, 1.0, ScalingMatrix::identity(1));
        let run = run_abc_smc(&m, &[0.1], &cfg, &mut RandomStream::new(26, 0)).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.population.iteration, 0);
        assert_eq!(run.stop, SmcStop::LowAcceptance);
    }

    #[test]
    fn gaussian_population_matches_conjugate_mean() {
        let n_obs = 100;
        let m = GaussianModel::new(n_obs, 0.1, 0.2).unwrap();
        let xbar = 0.05;
        let (pm, psd) = gaussian_exact_posterior(0.1, 0.2, xbar, n_obs).unwrap();
        let mut cfg = SmcSettings::new(256, 0.9, 0.05, ScalingMatrix::identity(1));
        cfg.max_iter = 40;
        let run = run_abc_smc(&m, &[xbar], &cfg, &mut RandomStream::new(27, 0)).unwrap();
        let pop = &run.population;
        let mean = pop.weighted_mean(0);
        let se = psd / pop.ess().unwrap().sqrt();
        assert!((mean - pm).abs() < 3.0 * se, "{mean} vs {pm} (se {se})");
        assert!(run.trace.windows(2).all(|w| w[1].delta <= w[0].delta));
    }

    #[test]
    fn smc_is_reproducible() {
        let m = GaussianModel::new(20, 0.0, 1.0).unwrap();
        let mut cfg = SmcSettings::new(50, 0.8, 0.1, ScalingMatrix::identity(1));
        cfg.max_iter = 8;
        let a = run_abc_smc(&m, &[0.2], &cfg, &mut RandomStream::new(28, 0)).unwrap();
        let b = run_abc_smc(&m, &[0.2], &cfg, &mut RandomStream::new(28, 0)).unwrap();
        assert_eq!(a.population, b.population);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn observer_sees_every_generation() {
        let m = GaussianModel::new(20, 0.0, 1.0).unwrap();
        let mut cfg = SmcSettings::new(50, 0.8, 0.0, ScalingMatrix::identity(1));
        cfg.max_iter = 6;
        let mut seen = Vec::new();
        let run = run_abc_smc_with(&m, &[0.2], &cfg, &mut RandomStream::new(29, 0), |p| seen.push((p.iteration, p.delta))).unwrap();
        assert_eq!(seen.len(), run.trace.len());
        for (g, (it, d)) in run.trace.iter().zip(&seen) {
            assert_eq!(g.iteration, *it);
            assert_eq!(g.delta, *d);
        }
        assert_eq!(run.population.iteration, seen.last().unwrap().0);
    }

    proptest! {
        #[test]
        fn reweight_hits_target_and_keeps_normalization(seed in 0u64..300, gamma in 0.2f64..0.95) {
            let mut rng = RandomStream::new(seed, 0);
            let n = 50;
            let d: Vec<f64> = (0..n).map(|_| rng.exponential(2.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let total: f64 = w.iter().sum();
            let pop = population(d, w.iter().map(|x| x / total).collect(), 5.0);
            let r = reweight_solve_delta(&pop, gamma, KernelKind::Gaussian).unwrap();
            prop_assert!(r.delta <= pop.delta);
            prop_assert!(r.weights.iter().all(|w| *w >= 0.0));
            prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if !r.fallback {
                let target = gamma * ess(&pop.weights).unwrap();
                prop_assert!((ess(&r.weights).unwrap() / target - 1.0).abs() < 1e-6);
            }
        }
    }
}
