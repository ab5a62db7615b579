//! Plot data: histogram densities of chains and likelihood-curve tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use stratabc_core::CurvePoint;

use crate::error::{CliError, CliResult};
use crate::output::{write_file, ChainTable};

pub const DEFAULT_BINS: usize = 50;

/// Equal-width histogram normalised to integrate to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: f64,
    pub width: f64,
    pub density: Vec<f64>,
}

impl DensityGrid {
    pub fn integral(&self) -> f64 {
        self.density.iter().map(|d| d * self.width).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lower\tupper\tdensity\n");
        for (i, d) in self.density.iter().enumerate() {
            let a = self.lo + i as f64 * self.width;
            let _ = writeln!(out, "{a}\t{}\t{d}", a + self.width);
        }
        out
    }
}

/// A constant sample gets one unit-wide bin centred on its value.
pub fn density_grid(values: &[f64], bins: usize) -> CliResult<DensityGrid> {
    weighted_density_grid(values, &vec![1.0; values.len()], bins)
}

/// Histogram of a weighted sample; non-finite values and non-positive
/// weights are ignored.
pub fn weighted_density_grid(values: &[f64], weights: &[f64], bins: usize) -> CliResult<DensityGrid> {
    let kept: Vec<(f64, f64)> = values.iter().zip(weights).filter(|(v, w)| v.is_finite() && **w > 0.0).map(|(v, w)| (*v, *w)).collect();
    if kept.is_empty() {
        return Err(CliError::config("density of an empty sample"));
    }
    if bins == 0 {
        return Err(CliError::config("at least one bin is needed"));
    }
    let lo = kept.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (lo, bins, width) = if hi > lo { (lo, bins, (hi - lo) / bins as f64) } else { (lo - 0.5, 1, 1.0) };
    let mut mass = vec![0.0; bins];
    for (v, w) in &kept {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        mass[k] += w;
    }
    let total: f64 = kept.iter().map(|p| p.1).sum();
    Ok(DensityGrid { lo, width, density: mass.iter().map(|m| m / (total * width)).collect() })
}

/// One density file per parameter column of `chain`, after `burn` rows.
pub fn emit_chain_densities(chain: &ChainTable, burn: usize, dir: &Path, prefix: &str, bins: usize) -> CliResult<Vec<PathBuf>> {
    if chain.len() <= burn {
        return Err(CliError::config(format!("chain has {} rows, nothing left after a burn-in of {burn}", chain.len())));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for (j, name) in chain.columns.iter().enumerate() {
        let grid = density_grid(&chain.column(j, burn), bins)?;
        let path = dir.join(format!("{prefix}density_{name}.tsv"));
        write_file(&path, &grid.to_tsv())?;
        out.push(path);
    }
    Ok(out)
}

/// Columns `theta, mean, lower, upper, median_attempts`; `theta` is the
/// swept coordinate on the natural scale.
pub fn curve_tsv(points: &[CurvePoint], natural: &[f64]) -> String {
    let mut out = String::from("theta\tmean\tlower\tupper\tmedian_attempts\n");
    for (p, t) in points.iter().zip(natural) {
        let _ = writeln!(out, "{t}\t{}\t{}\t{}\t{}", p.mean, p.lower, p.upper, p.median_attempts);
    }
    out
}

/// A likelihood-curve table read back.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub theta: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CurveTable {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut t = CurveTable { theta: vec![], mean: vec![], lower: vec![], upper: vec![] };
        for (i, line) in text.lines().skip(1).filter(|l| !l.is_empty()).enumerate() {
            let f: Vec<f64> = line
                .split('\t')
                .map(|s| s.parse::<f64>().map_err(|_| CliError::config(format!("curve row {}: not a number {s:?}", i + 1))))
                .collect::<CliResult<_>>()?;
            if f.len() != 5 {
                return Err(CliError::config(format!("curve row {}: expected 5 fields", i + 1)));
            }
            t.theta.push(f[0]);
            t.mean.push(f[1]);
            t.lower.push(f[2]);
            t.upper.push(f[3]);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_integrates_to_one() {
        let v: Vec<f64> = (0..997).map(|i| ((i * 7919) % 1000) as f64 / 37.0 - 3.0).collect();
        for bins in [1, 7, 50, 200] {
            let g = density_grid(&v, bins).unwrap();
            assert!((g.integral() - 1.0).abs() < 1e-6, "{bins}: {}", g.integral());
        }
    }

    #[test]
    fn constant_sample_is_one_bin() {
        let g = density_grid(&[2.0; 10], 20).unwrap();
        assert_eq!(g.density, vec![1.0]);
        assert_eq!(g.lo, 1.5);
    }

    #[test]
    fn maximum_lands_in_last_bin() {
        let g = density_grid(&[0.0, 1.0], 4).unwrap();
        assert_eq!(g.density, vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn weights_shift_mass() {
        let g = weighted_density_grid(&[0.0, 1.0], &[3.0, 1.0], 2).unwrap();
        assert_eq!(g.density, vec![1.5, 0.5]);
        assert!((g.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(density_grid(&[], 10).is_err());
        assert!(density_grid(&[f64::NAN], 10).is_err());
    }
}
