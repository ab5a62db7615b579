//! Independent priors on the sampling scale.

use crate::error::{check_len, AbcError, Result};
use crate::rng::RandomStream;

/// A one-dimensional prior marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Marginal {
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
            Marginal::Normal { mean, sd } => rng.normal(mean, sd),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Marginal::Normal { sd, .. } => sd * sd,
        }
    }
}

/// Product prior over a parameter vector, with per-coordinate log flags.
///
/// Coordinates flagged `log_scale` are sampled, proposed and given prior
/// mass as `log θ_j`; [`Prior::to_natural`] maps them back.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    names: Vec<String>,
    marginals: Vec<Marginal>,
    log_scale: Vec<bool>,
}

impl Prior {
    pub fn new(names: Vec<String>, marginals: Vec<Marginal>, log_scale: Vec<bool>) -> Result<Self> {
        check_len(names.len(), marginals.len())?;
        check_len(names.len(), log_scale.len())?;
        for m in &marginals {
            let ok = match *m {
                Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
                Marginal::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            };
            if !ok {
                return Err(AbcError::Parameter(format!("invalid prior marginal {m:?}")));
            }
        }
        Ok(Self { names, marginals, log_scale })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn log_scale(&self) -> &[bool] {
        &self.log_scale
    }

    /// Log prior density on the sampling scale; `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.marginals.iter().zip(theta).map(|(m, &x)| m.log_density(x)).sum()
    }

    pub fn sample(&self, rng: &mut RandomStream) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }

    pub fn to_natural(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.log_scale)
            .map(|(&x, &l)| if l { x.exp() } else { x })
            .collect()
    }

    pub fn to_sampling(&self, natural: &[f64]) -> Vec<f64> {
        natural
            .iter()
            .zip(&self.log_scale)
            .map(|(&x, &l)| if l { x.ln() } else { x })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_support() {
        let m = Marginal::Uniform { lo: 0.0, hi: 3.0 };
        assert_eq!(m.log_density(1.0), -(3.0f64).ln());
        assert_eq!(m.log_density(3.5), f64::NEG_INFINITY);
        assert_eq!(m.log_density(-0.1), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_density_at_mean() {
        let m = Marginal::Normal { mean: 0.1, sd: 0.2 };
        let expected = -(0.2f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_density(0.1) - expected).abs() < 1e-15);
    }

    #[test]
    fn log_transform_round_trip() {
        let p = Prior::new(
            vec!["a".into(), "b".into()],
            vec![Marginal::Uniform { lo: -6.0, hi: 2.0 }; 2],
            vec![true, false],
        )
        .unwrap();
        let nat = p.to_natural(&[0.0, 0.5]);
        assert_eq!(nat, vec![1.0, 0.5]);
        assert_eq!(p.to_sampling(&nat), vec![0.0, 0.5]);
        assert_eq!(p.log_density(&[f64::NAN, 0.0]), f64::NEG_INFINITY);
    }
}
