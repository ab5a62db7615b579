//! Small numeric helpers shared across modules.

use crate::error::{AbcError, Result};

/// Nearest-rank percentile: the `ceil(q/100 * n)`-th order statistic.
///
/// `q` is in `(0, 100]`; `q = 0` returns the minimum.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(AbcError::Parameter("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(AbcError::Parameter(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(sorted.len(), q) - 1])
}

/// Percentile of data that is already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    sorted[nearest_rank(sorted.len(), q) - 1]
}

/// 1-based nearest rank of percentile `q` in a sample of size `n`.
pub fn nearest_rank(n: usize, q: f64) -> usize {
    // q * n is formed before dividing so integral ranks stay exact
    let r = (q * n as f64 / 100.0 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

/// Median with the usual midpoint rule for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    median_in_place(&mut v)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Raw median absolute deviation (no consistency constant).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median_in_place(&mut dev)
}

/// Arithmetic mean, accumulated relative to the first value so that a
/// constant sample returns that constant exactly.
pub fn mean(values: &[f64]) -> f64 {
    let Some(&x0) = values.first() else { return f64::NAN };
    x0 + values.iter().map(|x| x - x0).sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// `log(sum(exp(x)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}
