//! ABC likelihood estimators: plain Monte Carlo, bootstrapped, stratified
//! with known or estimated strata probabilities, and the averaged variant
//! that exchanges the training and testing sets.
//!
//! The linear-scale functions follow the estimator definitions directly.
//! Samplers use the log-scale versions, which agree with them up to rounding
//! and do not underflow when kernels are evaluated far in the tails.

use crate::error::{check_len, AbcError, Result};
use crate::kernels::{distances_to, KernelConfig, Summaries};
use crate::stats::log_sum_exp;

/// Ordered distance breakpoints splitting `[0, inf)` into `J` strata.
///
/// A distance equal to a breakpoint belongs to the upper stratum, so the
/// strata are `[0, b1), [b1, b2), ..., [b_{J-1}, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataSpec {
    breakpoints: Vec<f64>,
}

impl StrataSpec {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(AbcError::Parameter("strata breakpoints must be finite and positive".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AbcError::Parameter("strata breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    /// The default three strata `(δ/2, δ)`.
    pub fn three(delta: f64) -> Result<Self> {
        Self::new(vec![delta / 2.0, delta])
    }

    pub fn single() -> Self {
        Self { breakpoints: Vec::new() }
    }

    /// Breakpoints as fractions of δ, e.g. `[0.5, 1.0]`.
    pub fn scaled(fractions: &[f64], delta: f64) -> Result<Self> {
        Self::new(fractions.iter().map(|f| f * delta).collect())
    }

    pub fn n_strata(&self) -> usize {
        self.breakpoints.len() + 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    #[inline]
    pub fn stratum_of(&self, d: f64) -> usize {
        self.breakpoints.iter().take_while(|&&b| d >= b).count()
    }
}

/// Training-set probabilities with testing-set counts and kernel sums.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataEstimate {
    pub omega_hat: Vec<f64>,
    pub n: Vec<usize>,
    pub kernel_sums: Vec<f64>,
}

/// A likelihood estimate held on the log scale; `-inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEstimate {
    pub log_value: f64,
    pub neglected_stratum: bool,
}

impl LikelihoodEstimate {
    pub fn from_log(log_value: f64) -> Self {
        Self { log_value, neglected_stratum: false }
    }

    pub fn from_value(value: f64) -> Self {
        Self::from_log(value.ln())
    }

    pub fn neglected() -> Self {
        Self { log_value: f64::NEG_INFINITY, neglected_stratum: true }
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn is_positive(&self) -> bool {
        self.log_value > f64::NEG_INFINITY
    }
}

fn check_kernel_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(AbcError::Parameter("no kernel values".into()));
    }
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(AbcError::Parameter("kernel values must be non-negative".into()));
    }
    Ok(())
}

/// Plain Monte Carlo average of `M` independent kernel evaluations.
pub fn mc_likelihood(kernel_values: &[f64]) -> Result<f64> {
    check_kernel_values(kernel_values)?;
    Ok(kernel_values.iter().sum::<f64>() / kernel_values.len() as f64)
}

/// Bootstrapped estimator: the mean kernel over `R` resamples.
pub fn res_likelihood(kernel_values: &[f64]) -> Result<f64> {
    mc_likelihood(kernel_values)
}

/// Stratified estimator with known strata probabilities and draws taken
/// conditionally within each stratum.
pub fn strat_likelihood_known(omega: &[f64], per_stratum: &[Vec<f64>]) -> Result<f64> {
    check_len(omega.len(), per_stratum.len())?;
    let mut total = 0.0;
    for (w, vals) in omega.iter().zip(per_stratum) {
        if vals.is_empty() {
            return Err(AbcError::Parameter("every stratum needs at least one draw".into()));
        }
        total += w / vals.len() as f64 * vals.iter().sum::<f64>();
    }
    Ok(total)
}

/// Stratum frequencies of the training distances; the last stratum takes
/// the complement so the vector sums to exactly one.
pub fn estimate_strata_probs(distances: &[f64], spec: &StrataSpec) -> Vec<f64> {
    let counts = stratum_counts(distances, spec);
    probs_from_counts(&counts, distances.len())
}

fn stratum_counts(distances: &[f64], spec: &StrataSpec) -> Vec<usize> {
    let mut counts = vec![0usize; spec.n_strata()];
    for &d in distances {
        counts[spec.stratum_of(d)] += 1;
    }
    counts
}

fn probs_from_counts(counts: &[usize], total: usize) -> Vec<f64> {
    let j = counts.len();
    let mut omega: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    omega[j - 1] = 1.0 - omega[..j - 1].iter().sum::<f64>();
    omega
}

/// Testing counts `n_j` and per-stratum kernel sums.
pub fn count_and_sum_strata(distances: &[f64], kernel_values: &[f64], spec: &StrataSpec) -> Result<(Vec<usize>, Vec<f64>)> {
    check_len(distances.len(), kernel_values.len())?;
    let j = spec.n_strata();
    let (mut n, mut sums) = (vec![0usize; j], vec![0.0; j]);
    for (&d, &k) in distances.iter().zip(kernel_values) {
        let s = spec.stratum_of(d);
        n[s] += 1;
        sums[s] += k;
    }
    Ok((n, sums))
}

/// Post-stratified estimate; zero with `neglected_stratum` if any `n_j = 0`.
pub fn strat_likelihood(omega_hat: &[f64], n: &[usize], kernel_sums: &[f64]) -> (f64, bool) {
    if n.iter().any(|&c| c == 0) {
        return (0.0, true);
    }
    let v = omega_hat
        .iter()
        .zip(n)
        .zip(kernel_sums)
        .map(|((w, &c), s)| w * (s / c as f64))
        .sum();
    (v, false)
}

/// Builds the full [`StrataEstimate`] from training and testing quantities.
pub fn strata_estimate(train_distances: &[f64], test_distances: &[f64], test_kernels: &[f64], spec: &StrataSpec) -> Result<StrataEstimate> {
    let omega_hat = estimate_strata_probs(train_distances, spec);
    let (n, kernel_sums) = count_and_sum_strata(test_distances, test_kernels, spec)?;
    Ok(StrataEstimate { omega_hat, n, kernel_sums })
}

/// Log bootstrapped likelihood from resample distances.
pub fn log_res_likelihood(distances: &[f64], kernel: &KernelConfig) -> LikelihoodEstimate {
    if distances.is_empty() {
        return LikelihoodEstimate::from_log(f64::NEG_INFINITY);
    }
    let logs: Vec<f64> = distances.iter().map(|&d| kernel.log_eval(d)).collect();
    LikelihoodEstimate::from_log(log_sum_exp(&logs) - (distances.len() as f64).ln())
}

/// Log post-stratified likelihood from training and testing distances.
/// Returns the estimate together with the testing counts `n_j`.
pub fn log_strat_likelihood(train: &[f64], test: &[f64], spec: &StrataSpec, kernel: &KernelConfig) -> (LikelihoodEstimate, Vec<usize>) {
    let j = spec.n_strata();
    let counts_train = stratum_counts(train, spec);
    let omega = probs_from_counts(&counts_train, train.len());
    let mut n = vec![0usize; j];
    let mut logs: Vec<Vec<f64>> = vec![Vec::new(); j];
    for &d in test {
        let s = spec.stratum_of(d);
        n[s] += 1;
        logs[s].push(kernel.log_eval(d));
    }
    if n.iter().any(|&c| c == 0) {
        return (LikelihoodEstimate::neglected(), n);
    }
    let terms: Vec<f64> = (0..j)
        .map(|s| omega[s].ln() - (n[s] as f64).ln() + log_sum_exp(&logs[s]))
        .collect();
    (LikelihoodEstimate::from_log(log_sum_exp(&terms)), n)
}

/// Averaged estimator: the mean of the two stratified estimates obtained by
/// exchanging training and testing sets. Zero if either neglects a stratum.
pub fn log_averaged_strat_likelihood(train: &[f64], test: &[f64], spec: &StrataSpec, kernel: &KernelConfig) -> (LikelihoodEstimate, Vec<usize>) {
    let (a, n) = log_strat_likelihood(train, test, spec, kernel);
    let (b, _) = log_strat_likelihood(test, train, spec, kernel);
    if a.neglected_stratum || b.neglected_stratum {
        return (LikelihoodEstimate::neglected(), n);
    }
    let v = log_sum_exp(&[a.log_value, b.log_value]) - std::f64::consts::LN_2;
    (LikelihoodEstimate::from_log(v), n)
}

/// Averaged estimator on summary sets.
pub fn averaged_strat_likelihood(
    train: &Summaries,
    test: &Summaries,
    s_obs: &[f64],
    spec: &StrataSpec,
    kernel: &KernelConfig,
) -> Result<LikelihoodEstimate> {
    let dt = distances_to(train, s_obs, &kernel.sigma)?;
    let ds = distances_to(test, s_obs, &kernel.sigma)?;
    Ok(log_averaged_strat_likelihood(&dt, &ds, spec, kernel).0)
}

/// Indicator-kernel check: with `δ` among the breakpoints, the stratified
/// estimate collapses to the fraction of training distances below `δ`.
/// Returns `(stratified value, plain Monte Carlo value on the training set)`.
pub fn indicator_strat_collapse_check(train: &[f64], test: &[f64], spec: &StrataSpec, delta: f64) -> Result<(f64, f64)> {
    if train.is_empty() || test.is_empty() {
        return Err(AbcError::Parameter("empty distance set".into()));
    }
    if !spec.breakpoints().contains(&delta) {
        return Err(AbcError::Parameter("δ must be one of the strata breakpoints".into()));
    }
    let ind = |d: &f64| if *d < delta { 1.0 } else { 0.0 };
    let test_k: Vec<f64> = test.iter().map(ind).collect();
    let train_k: Vec<f64> = train.iter().map(ind).collect();
    let est = strata_estimate(train, test, &test_k, spec)?;
    let (strat, _) = strat_likelihood(&est.omega_hat, &est.n, &est.kernel_sums);
    Ok((strat, mc_likelihood(&train_k)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelKind, ScalingMatrix};
    use crate::rng::RandomStream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mc_and_res_examples() {
        assert_eq!(mc_likelihood(&[0.7]).unwrap(), 0.7);
        assert_eq!(mc_likelihood(&[2.5; 9]).unwrap(), 2.5);
        assert_eq!(mc_likelihood(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 1.5);
        assert_eq!(res_likelihood(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!(mc_likelihood(&[]).is_err());
        let v = [0.3, 1.7, 0.01, 4.2];
        assert_eq!(res_likelihood(&v).unwrap(), mc_likelihood(&v).unwrap());
    }

    #[test]
    fn known_omega_examples() {
        assert_eq!(strat_likelihood_known(&[1.0], &[vec![1.0, 2.0, 6.0]]).unwrap(), 3.0);
        assert_eq!(strat_likelihood_known(&[0.5, 0.5], &[vec![2.0], vec![4.0]]).unwrap(), 3.0);
        let base = strat_likelihood_known(&[0.2, 0.8], &[vec![1.0, 2.0], vec![3.0]]).unwrap();
        let scaled = strat_likelihood_known(&[0.2, 0.8], &[vec![7.0, 14.0], vec![21.0]]).unwrap();
        assert_relative_eq!(scaled, 7.0 * base, max_relative = 1e-15);
        assert!(strat_likelihood_known(&[0.5, 0.5], &[vec![1.0], vec![]]).is_err());
    }

    #[test]
    fn strata_probs_examples() {
        let delta = 2.0;
        let spec = StrataSpec::three(delta).unwrap();
        let w = estimate_strata_probs(&[0.1 * delta, 0.7 * delta, 2.0 * delta], &spec);
        assert_eq!(w, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0]);
        assert_eq!(estimate_strata_probs(&[3.0, 5.0, 9.0], &spec), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn strata_probs_binomial() {
        let delta = 1.0;
        let spec = StrataSpec::three(delta).unwrap();
        let mut rng = RandomStream::new(11, 0);
        let d: Vec<f64> = (0..500).map(|_| 2.0 * delta * rng.uniform()).collect();
        let w = estimate_strata_probs(&d, &spec);
        for (got, p) in w.iter().zip([0.25, 0.25, 0.5]) {
            let se = (p * (1.0 - p) / 500.0f64).sqrt();
            assert!((got - p).abs() < 3.0 * se, "{got} vs {p}");
        }
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn breakpoint_ties_go_up() {
        let spec = StrataSpec::three(1.0).unwrap();
        assert_eq!(spec.stratum_of(0.0), 0);
        assert_eq!(spec.stratum_of(0.5), 1);
        assert_eq!(spec.stratum_of(1.0), 2);
    }

    #[test]
    fn count_and_sum_examples() {
        let delta = 1.0;
        let spec = StrataSpec::three(delta).unwrap();
        let (n, s) = count_and_sum_strata(&[0.1, 0.9], &[3.0, 5.0], &spec).unwrap();
        assert_eq!(n, vec![1, 1, 0]);
        assert_eq!(s, vec![3.0, 5.0, 0.0]);
        let (n, _) = count_and_sum_strata(&[2.0; 40], &[0.0; 40], &spec).unwrap();
        assert_eq!(n, vec![0, 0, 40]);
        assert!(count_and_sum_strata(&[1.0], &[], &spec).is_err());
    }

    #[test]
    fn strat_examples() {
        assert_eq!(strat_likelihood(&[0.1, 0.2, 0.7], &[5, 0, 495], &[1.0, 0.0, 2.0]), (0.0, true));
        let (v, neg) = strat_likelihood(&[0.5, 0.5], &[1, 1], &[3.0, 5.0]);
        assert_eq!((v, neg), (4.0, false));
    }

    #[test]
    fn single_stratum_is_bit_exact() {
        let mut rng = RandomStream::new(5, 0);
        let k: Vec<f64> = (0..500).map(|_| rng.uniform() * 1e3).collect();
        let d: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
        let spec = StrataSpec::single();
        let est = strata_estimate(&d, &d, &k, &spec).unwrap();
        assert_eq!(est.omega_hat, vec![1.0]);
        let (v, _) = strat_likelihood(&est.omega_hat, &est.n, &est.kernel_sums);
        assert_eq!(v.to_bits(), res_likelihood(&k).unwrap().to_bits());
    }

    #[test]
    fn collapse_examples() {
        let delta = 1.0;
        let mut rng = RandomStream::new(8, 1);
        let train: Vec<f64> = (0..400).map(|_| 2.0 * rng.uniform()).collect();
        let test: Vec<f64> = (0..400).map(|_| 2.0 * rng.uniform()).collect();
        let two = StrataSpec::new(vec![delta]).unwrap();
        let (s, m) = indicator_strat_collapse_check(&train, &test, &two, delta).unwrap();
        let w = estimate_strata_probs(&train, &two);
        assert_eq!(s, w[0]);
        assert!((s - m).abs() < 1e-12);
        let three = StrataSpec::three(delta).unwrap();
        let (s, m) = indicator_strat_collapse_check(&train, &test, &three, delta).unwrap();
        let w = estimate_strata_probs(&train, &three);
        assert!((s - (w[0] + w[1])).abs() < 1e-15);
        assert!((s - m).abs() < 1e-12);
        let far = vec![5.0; 10];
        assert_eq!(indicator_strat_collapse_check(&far, &far, &three, delta).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn log_scale_matches_linear() {
        let kernel = KernelConfig::new(KernelKind::Gaussian, 0.8, ScalingMatrix::identity(1)).unwrap();
        let spec = StrataSpec::three(0.8).unwrap();
        let mut rng = RandomStream::new(21, 0);
        let train: Vec<f64> = (0..300).map(|_| 1.5 * rng.uniform()).collect();
        let test: Vec<f64> = (0..300).map(|_| 1.5 * rng.uniform()).collect();
        let kv: Vec<f64> = test.iter().map(|&d| kernel.log_eval(d).exp()).collect();
        let est = strata_estimate(&train, &test, &kv, &spec).unwrap();
        let (lin, _) = strat_likelihood(&est.omega_hat, &est.n, &est.kernel_sums);
        let (lg, n) = log_strat_likelihood(&train, &test, &spec, &kernel);
        assert_eq!(n, est.n);
        assert_relative_eq!(lg.value(), lin, max_relative = 1e-12);
        let r = log_res_likelihood(&test, &kernel);
        assert_relative_eq!(r.value(), res_likelihood(&kv).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn averaged_examples() {
        let kernel = KernelConfig::new(KernelKind::Gaussian, 1.0, ScalingMatrix::identity(1)).unwrap();
        let spec = StrataSpec::three(1.0).unwrap();
        let d = vec![0.1, 0.6, 1.4, 0.3, 2.0];
        let (single, _) = log_strat_likelihood(&d, &d, &spec, &kernel);
        let (avg, _) = log_averaged_strat_likelihood(&d, &d, &spec, &kernel);
        assert_relative_eq!(avg.log_value, single.log_value, max_relative = 1e-14);
        // training set has no stratum-2 draw: the exchanged component neglects it
        let a = vec![0.1, 0.2, 1.5];
        let b = vec![0.1, 0.7, 1.5];
        assert!(!log_strat_likelihood(&a, &b, &spec, &kernel).0.neglected_stratum);
        let (avg, _) = log_averaged_strat_likelihood(&a, &b, &spec, &kernel);
        assert!(avg.neglected_stratum);
        assert_eq!(avg.value(), 0.0);
    }

    #[test]
    fn averaged_on_summaries() {
        let kernel = KernelConfig::new(KernelKind::Gaussian, 1.0, ScalingMatrix::identity(1)).unwrap();
        let spec = StrataSpec::three(1.0).unwrap();
        let set = Summaries::from_rows(1, vec![0.1, -0.6, 1.4, 0.3, 2.0]).unwrap();
        let got = averaged_strat_likelihood(&set, &set, &[0.0], &spec, &kernel).unwrap();
        let d: Vec<f64> = set.rows().map(|r| r[0].abs()).collect();
        assert_relative_eq!(got.log_value, log_strat_likelihood(&d, &d, &spec, &kernel).0.log_value, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn permutation_invariance(
            w in prop::collection::vec(0.01f64..1.0, 3),
            n in prop::collection::vec(1usize..50, 3),
            s in prop::collection::vec(0.0f64..10.0, 3),
            perm in Just([2usize, 0, 1]),
        ) {
            let (a, _) = strat_likelihood(&w, &n, &s);
            let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
            let pn: Vec<usize> = perm.iter().map(|&i| n[i]).collect();
            let ps: Vec<f64> = perm.iter().map(|&i| s[i]).collect();
            let (b, _) = strat_likelihood(&pw, &pn, &ps);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn zero_iff_neglected_or_all_zero(
            n in prop::collection::vec(0usize..4, 3),
            s in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 2.0]), 3),
        ) {
            let s: Vec<f64> = s.iter().zip(&n).map(|(v, &c)| if c == 0 { 0.0 } else { *v }).collect();
            let (v, neg) = strat_likelihood(&[0.2, 0.3, 0.5], &n, &s);
            prop_assert!(v >= 0.0);
            let all_zero = s.iter().all(|&x| x == 0.0);
            prop_assert_eq!(v == 0.0, neg || all_zero);
        }

        #[test]
        fn counts_partition_test_set(d in prop::collection::vec(0.0f64..3.0, 1..200)) {
            let spec = StrataSpec::three(1.0).unwrap();
            let k = vec![1.0; d.len()];
            let (n, _) = count_and_sum_strata(&d, &k, &spec).unwrap();
            prop_assert_eq!(n.iter().sum::<usize>(), d.len());
            let w = estimate_strata_probs(&d, &spec);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
