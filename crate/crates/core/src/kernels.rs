//! Scaled distances between summary vectors and ABC kernel evaluations.
//!
//! Distances are Mahalanobis-type with a diagonal scaling matrix `Σ`:
//! `d = sqrt((s* - s)' Σ⁻¹ (s* - s))`. The Gaussian kernel keeps its
//! `1/δ^{n_s}` normalisation so likelihood curves at different thresholds are
//! comparable.

use crate::error::{check_len, AbcError, Result};

/// Floor applied to scaling entries so `Σ` stays invertible.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// A vector of summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryVector(pub Vec<f64>);

impl SummaryVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for SummaryVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A row-major set of summary vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Summaries {
    n_s: usize,
    data: Vec<f64>,
}

impl Summaries {
    pub fn new(n_s: usize) -> Self {
        Self { n_s, data: Vec::new() }
    }

    pub fn with_capacity(n_s: usize, rows: usize) -> Self {
        Self { n_s, data: Vec::with_capacity(n_s * rows) }
    }

    pub fn from_rows(n_s: usize, data: Vec<f64>) -> Result<Self> {
        if n_s == 0 || data.len() % n_s != 0 {
            return Err(AbcError::Dimension { expected: n_s, found: data.len() });
        }
        Ok(Self { n_s, data })
    }

    pub fn dim(&self) -> usize {
        self.n_s
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_s
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_s);
        self.data.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_s..(i + 1) * self.n_s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_s)
    }

    pub fn clear(&mut self) {
        self.data.clear();
    }

    pub fn extend(&mut self, other: &Summaries) {
        debug_assert_eq!(other.n_s, self.n_s);
        self.data.extend_from_slice(&other.data);
    }

    /// Column `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Diagonal scaling matrix `Σ`, stored as its positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrix {
    diag: Vec<f64>,
    inv: Vec<f64>,
}

impl ScalingMatrix {
    /// Builds `Σ = diag(entries)`, flooring each entry at [`SIGMA_FLOOR`].
    pub fn from_diag(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(AbcError::Parameter("empty scaling matrix".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(AbcError::Parameter("non-finite scaling entry".into()));
        }
        let diag: Vec<f64> = entries.into_iter().map(|v| v.max(SIGMA_FLOOR)).collect();
        let inv = diag.iter().map(|v| 1.0 / v).collect();
        Ok(Self { diag, inv })
    }

    pub fn identity(n_s: usize) -> Self {
        Self { diag: vec![1.0; n_s], inv: vec![1.0; n_s] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Squared scaled distance without the length check.
    #[inline]
    pub(crate) fn sq_distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.inv)
            .map(|((x, y), w)| {
                let d = x - y;
                d * d * w
            })
            .sum()
    }
}

/// `sqrt((s* - s)' Σ⁻¹ (s* - s))`.
pub fn scaled_distance(s_star: &[f64], s: &[f64], sigma: &ScalingMatrix) -> Result<f64> {
    check_len(s.len(), s_star.len())?;
    check_len(sigma.dim(), s.len())?;
    Ok(sigma.sq_distance_unchecked(s_star, s).sqrt())
}

/// Scaled distances of every row in `set` to `observed`.
///
/// Rows with non-finite summaries get an infinite distance, so they carry
/// zero kernel weight.
pub fn distances_to(set: &Summaries, observed: &[f64], sigma: &ScalingMatrix) -> Result<Vec<f64>> {
    check_len(observed.len(), set.dim())?;
    check_len(sigma.dim(), set.dim())?;
    Ok(set.rows().map(|r| finite_distance(sigma, r, observed)).collect())
}

#[inline]
pub(crate) fn finite_distance(sigma: &ScalingMatrix, a: &[f64], b: &[f64]) -> f64 {
    let d = sigma.sq_distance_unchecked(a, b).sqrt();
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(AbcError::Parameter(format!("kernel threshold must be positive, got {delta}")))
    }
}

/// Unnormalised Gaussian kernel `δ^{-n_s} exp(-d²/(2δ²))`.
pub fn gaussian_kernel(s_star: &[f64], s: &[f64], sigma: &ScalingMatrix, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let d = scaled_distance(s_star, s, sigma)?;
    Ok(log_gaussian_kernel_at(d, delta, s.len()).exp())
}

/// Log of the Gaussian kernel as a function of the scaled distance.
#[inline]
pub fn log_gaussian_kernel_at(d: f64, delta: f64, n_s: usize) -> f64 {
    -(n_s as f64) * delta.ln() - d * d / (2.0 * delta * delta)
}

/// `1` when `d < δ`, else `0`.
pub fn indicator_kernel(d: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if d < 0.0 || d.is_nan() {
        return Err(AbcError::Parameter(format!("distance must be non-negative, got {d}")));
    }
    Ok(if d < delta { 1.0 } else { 0.0 })
}

/// The ABC kernel family in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    #[default]
    Gaussian,
    Indicator,
}

impl KernelKind {
    /// Log kernel value at scaled distance `d`; `-inf` for a zero kernel.
    #[inline]
    pub fn log_eval(self, d: f64, delta: f64, n_s: usize) -> f64 {
        match self {
            KernelKind::Gaussian => log_gaussian_kernel_at(d, delta, n_s),
            KernelKind::Indicator => {
                if d < delta {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    #[inline]
    pub fn eval(self, d: f64, delta: f64, n_s: usize) -> f64 {
        self.log_eval(d, delta, n_s).exp()
    }
}

/// A kernel together with its threshold and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub delta: f64,
    pub sigma: ScalingMatrix,
}

impl KernelConfig {
    pub fn new(kind: KernelKind, delta: f64, sigma: ScalingMatrix) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { kind, delta, sigma })
    }

    pub fn n_s(&self) -> usize {
        self.sigma.dim()
    }

    pub fn log_eval(&self, d: f64) -> f64 {
        self.kind.log_eval(d, self.delta, self.n_s())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let id = ScalingMatrix::identity(2);
        assert_eq!(scaled_distance(&[1.0, 2.0], &[1.0, 2.0], &id).unwrap(), 0.0);
        assert_eq!(scaled_distance(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap(), 5.0);
        let s = ScalingMatrix::from_diag(vec![4.0, 1.0]).unwrap();
        // 2²/4 + 3²/1 = 10
        assert_relative_eq!(scaled_distance(&[2.0, 3.0], &[0.0, 0.0], &s).unwrap(), 10f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn distance_length_mismatch() {
        let id = ScalingMatrix::identity(2);
        assert!(matches!(
            scaled_distance(&[1.0], &[1.0, 2.0], &id),
            Err(AbcError::Dimension { .. })
        ));
    }

    #[test]
    fn gaussian_kernel_examples() {
        let one = ScalingMatrix::identity(1);
        assert_eq!(gaussian_kernel(&[0.3], &[0.3], &one, 1.0).unwrap(), 1.0);
        // (1/0.5) exp(-0.25 / 0.5) = 2 e^{-1/2}
        assert_relative_eq!(
            gaussian_kernel(&[0.5], &[0.0], &one, 0.5).unwrap(),
            2.0 * (-0.5f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(gaussian_kernel(&[0.5], &[0.0], &one, 0.5).unwrap(), 1.21306, max_relative = 1e-5);
        assert!(gaussian_kernel(&[0.0], &[0.0], &one, 0.0).is_err());
        assert!(gaussian_kernel(&[0.0], &[0.0], &one, -1.0).is_err());
    }

    #[test]
    fn indicator_boundary_is_strict() {
        assert_eq!(indicator_kernel(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(indicator_kernel(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(indicator_kernel(2.0, 1.0).unwrap(), 0.0);
        assert!(indicator_kernel(0.5, 0.0).is_err());
    }

    #[test]
    fn sigma_is_floored() {
        let s = ScalingMatrix::from_diag(vec![0.0, 2.0]).unwrap();
        assert_eq!(s.diag(), &[SIGMA_FLOOR, 2.0]);
    }

    #[test]
    fn kernel_positive_and_continuous_in_delta() {
        let sigma = ScalingMatrix::from_diag(vec![0.5, 2.0]).unwrap();
        let (a, b) = ([0.3, -1.2], [0.1, 0.4]);
        let d = scaled_distance(&a, &b, &sigma).unwrap();
        let grid: Vec<f64> = (1..=2000).map(|i| 0.01 * i as f64).collect();
        // log space, since the linear kernel underflows for the smallest δ
        let logs: Vec<f64> = grid.iter().map(|&delta| log_gaussian_kernel_at(d, delta, 2)).collect();
        assert!(logs.iter().all(|v| v.is_finite()));
        for (delta, l) in grid.iter().zip(&logs).skip(100) {
            assert_relative_eq!(gaussian_kernel(&a, &b, &sigma, *delta).unwrap(), l.exp(), max_relative = 1e-12);
        }
        for w in logs.windows(2).skip(100) {
            assert!((w[1] - w[0]).abs() < 0.5);
        }
    }


    proptest! {
        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
            c in prop::collection::vec(-10.0f64..10.0, 3),
            w in prop::collection::vec(0.01f64..10.0, 3),
        ) {
            let s = ScalingMatrix::from_diag(w).unwrap();
            let ab = scaled_distance(&a, &b, &s).unwrap();
            let bc = scaled_distance(&b, &c, &s).unwrap();
            let ac = scaled_distance(&a, &c, &s).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn kernel_consistent_with_distance(
            a in prop::collection::vec(-3.0f64..3.0, 2),
            b in prop::collection::vec(-3.0f64..3.0, 2),
            delta in 0.1f64..5.0,
        ) {
            let s = ScalingMatrix::from_diag(vec![0.7, 1.9]).unwrap();
            let d = scaled_distance(&a, &b, &s).unwrap();
            let k = gaussian_kernel(&a, &b, &s, delta).unwrap();
            let expected = delta.powi(-2) * (-d * d / (2.0 * delta * delta)).exp();
            prop_assert!((k - expected).abs() <= 1e-12 * expected.max(1e-300));
            prop_assert_eq!(k, gaussian_kernel(&b, &a, &s, delta).unwrap());
        }
    }
}
