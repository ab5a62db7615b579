//! Ising model on a toroidal square grid: Gibbs simulator, the sufficient
//! statistic `S(x)`, a tile-bootstrap fast path, and the exchange algorithm
//! used as the gold-standard sampler.

use std::time::Instant;

use crate::dataset::{Dataset, Shape};
use crate::error::{AbcError, Result};
use crate::kernels::Summaries;
use crate::models::prior::{Marginal, Prior};
use crate::models::Model;
use crate::resampling::{BlockScheme, IndexMatrix};
use crate::rng::RandomStream;
use crate::samplers::chain::{Chain, ChainRecord};

/// `S(x) = Σ_k Σ_{neighbours ℵ of k} x_k x_ℵ` with 4-neighbourhoods on the
/// torus; every edge is counted twice.
pub fn ising_statistic(side: usize, spins: &[i8]) -> Result<i64> {
    if spins.len() != side * side {
        return Err(AbcError::Data("spin grid is not square".into()));
    }
    if spins.iter().any(|&s| s != 1 && s != -1) {
        return Err(AbcError::Data("spins must be +1 or -1".into()));
    }
    Ok(statistic_unchecked(side, spins))
}

fn statistic_unchecked(l: usize, s: &[i8]) -> i64 {
    let mut total = 0i64;
    for r in 0..l {
        let down = ((r + 1) % l) * l;
        for c in 0..l {
            let right = if c + 1 == l { 0 } else { c + 1 };
            let x = s[r * l + c] as i64;
            total += x * (s[r * l + right] as i64 + s[down + c] as i64);
        }
    }
    2 * total
}

/// Sum of the four torus neighbours of site `(r, c)`.
#[inline]
pub fn neighbour_sum(l: usize, s: &[i8], r: usize, c: usize) -> i32 {
    let up = if r == 0 { l - 1 } else { r - 1 };
    let down = if r + 1 == l { 0 } else { r + 1 };
    let left = if c == 0 { l - 1 } else { c - 1 };
    let right = if c + 1 == l { 0 } else { c + 1 };
    s[up * l + c] as i32 + s[down * l + c] as i32 + s[r * l + left] as i32 + s[r * l + right] as i32
}

/// Raster-scan Gibbs sweeps with `P(x_k = +1 | rest) = 1 / (1 + exp(-2θ m_k))`,
/// `m_k` the neighbour sum.
pub fn gibbs_sweeps(theta: f64, l: usize, spins: &mut [i8], sweeps: usize, rng: &mut RandomStream) {
    // m_k is in {-4, -2, 0, 2, 4}
    let p_up: [f64; 5] = std::array::from_fn(|i| {
        let m = 2.0 * i as f64 - 4.0;
        1.0 / (1.0 + (-2.0 * theta * m).exp())
    });
    for _ in 0..sweeps {
        for r in 0..l {
            let row = r * l;
            let up = if r == 0 { l - 1 } else { r - 1 } * l;
            let down = if r + 1 == l { 0 } else { r + 1 } * l;
            for c in 0..l {
                let left = if c == 0 { l - 1 } else { c - 1 };
                let right = if c + 1 == l { 0 } else { c + 1 };
                let m = spins[up + c] as i32 + spins[down + c] as i32 + spins[row + left] as i32 + spins[row + right] as i32;
                let p = p_up[((m + 4) / 2) as usize];
                spins[row + c] = if rng.uniform() < p { 1 } else { -1 };
            }
        }
    }
}

/// Final state of `sweeps` Gibbs sweeps started from the all-(+1) grid.
pub fn ising_simulate(theta: f64, side: usize, sweeps: usize, rng: &mut RandomStream) -> Dataset {
    let mut spins = vec![1i8; side * side];
    gibbs_sweeps(theta, side, &mut spins, sweeps, rng);
    Dataset::Grid { side, spins }
}

/// Ising model with `θ ~ U(0, 3)`, `S(x)` as the single summary and a
/// non-overlapping tile bootstrap.
#[derive(Debug, Clone)]
pub struct IsingModel {
    side: usize,
    sweeps: usize,
    tile: usize,
    prior: Prior,
}

impl IsingModel {
    pub fn new(side: usize, sweeps: usize, tile: usize, prior_hi: f64) -> Result<Self> {
        if side == 0 || sweeps == 0 {
            return Err(AbcError::Parameter("grid side and sweeps must be positive".into()));
        }
        if tile == 0 || side % tile != 0 {
            return Err(AbcError::Config(format!("tile {tile} does not divide grid side {side}")));
        }
        let prior = Prior::new(vec!["theta".into()], vec![Marginal::Uniform { lo: 0.0, hi: prior_hi }], vec![false])?;
        Ok(Self { side, sweeps, tile, prior })
    }

    /// 100×100 grid, 50 sweeps, 20×20 tiles, `U(0, 3)` prior.
    pub fn reference() -> Self {
        Self::new(100, 50, 20, 3.0).expect("valid reference settings")
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

impl Model for IsingModel {
    fn name(&self) -> &str {
        "ising"
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn n_summaries(&self) -> usize {
        1
    }

    fn data_shape(&self) -> Shape {
        Shape::Square(self.side)
    }

    fn block_scheme(&self) -> BlockScheme {
        BlockScheme::GridBlocks { h: self.tile, w: self.tile }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Dataset> {
        Ok(ising_simulate(theta[0], self.side, self.sweeps, rng))
    }

    fn summarize(&self, x: &Dataset) -> Result<Vec<f64>> {
        let (side, spins) = x.as_grid()?;
        Ok(vec![ising_statistic(side, spins)? as f64])
    }

    /// Block bootstrap of the statistic: each tile contributes
    /// `Σ_k x_k · (neighbour sum of k in the original grid)` over its sites,
    /// and a resample's statistic is the sum of the contributions of the
    /// tiles it draws. The identity row gives `S(x)` exactly, and every
    /// resample has expectation `S(x)`. Re-tiling the grid instead would cut
    /// the correlated edges along tile seams and bias `S` downwards.
    fn summarize_resamples(&self, x: &Dataset, u: &IndexMatrix, out: &mut Summaries) -> Result<()> {
        let contrib = tile_contributions(x, self.tile)?;
        let nt = contrib.len();
        if u.n_units() != nt || u.n_cols() != nt {
            return Err(AbcError::Dimension { expected: nt, found: u.n_cols() });
        }
        for row in u.rows() {
            let total: i64 = row.iter().map(|&b| contrib[b as usize]).sum();
            out.push(&[total as f64]);
        }
        Ok(())
    }
}

/// Per-tile contributions to `S(x)` for `tile × tile` tiles in raster order.
pub fn tile_contributions(x: &Dataset, tile: usize) -> Result<Vec<i64>> {
    let (l, s) = x.as_grid()?;
    if tile == 0 || l % tile != 0 {
        return Err(AbcError::Config(format!("tile {tile} does not divide grid side {l}")));
    }
    let per_row = l / tile;
    let mut contrib = vec![0i64; per_row * per_row];
    for r in 0..l {
        for c in 0..l {
            let k = (r / tile) * per_row + c / tile;
            contrib[k] += s[r * l + c] as i64 * neighbour_sum(l, s, r, c) as i64;
        }
    }
    Ok(contrib)
}

/// Exchange algorithm for `θ` given observed statistic `s_obs`.
///
/// An auxiliary grid `w` is drawn at the proposal with the model's Gibbs
/// simulator. That sampler targets `exp(θ S(x) / 2)`, since `S` counts every
/// edge twice, so the move is accepted with probability
/// `min{1, π(θ')/π(θ) · exp((θ' - θ)(S(x) - S(w)) / 2)}`.
pub fn ising_exchange_sampler(
    model: &IsingModel,
    s_obs: f64,
    init: f64,
    proposal_sd: f64,
    n_iter: usize,
    rng: &mut RandomStream,
) -> Result<Chain> {
    let prior = model.prior();
    let mut chain = Chain::new("exchange", prior);
    let mut theta = init;
    let mut lp = prior.log_density(&[theta]);
    if lp == f64::NEG_INFINITY {
        return Err(AbcError::Startup(format!("initial θ = {init} outside the prior support")));
    }
    let start = Instant::now();
    for _ in 0..n_iter {
        let prop = theta + proposal_sd * rng.standard_normal();
        let lp_new = prior.log_density(&[prop]);
        let mut accepted = false;
        if lp_new > f64::NEG_INFINITY {
            let w = ising_simulate(prop, model.side, model.sweeps, rng);
            chain.n_simulations += 1;
            let (side, spins) = w.as_grid()?;
            let s_aux = statistic_unchecked(side, spins) as f64;
            let log_alpha = lp_new - lp + 0.5 * (prop - theta) * (s_obs - s_aux);
            if log_alpha >= 0.0 || rng.uniform().ln() < log_alpha {
                theta = prop;
                lp = lp_new;
                accepted = true;
            }
        }
        chain.records.push(ChainRecord { theta: vec![theta], log_lik: f64::NAN, accepted, delta: f64::NAN, strata: None });
    }
    chain.elapsed_secs = start.elapsed().as_secs_f64();
    chain.final_proposal_cov = vec![proposal_sd * proposal_sd];
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resampling::make_index_matrix;

    #[test]
    fn statistic_examples() {
        assert_eq!(ising_statistic(2, &[1; 4]).unwrap(), 16);
        assert_eq!(ising_statistic(6, &[1; 36]).unwrap(), 4 * 36);
        let l = 6;
        let checker: Vec<i8> = (0..l * l).map(|k| if (k / l + k % l) % 2 == 0 { 1 } else { -1 }).collect();
        assert_eq!(ising_statistic(l, &checker).unwrap(), -4 * 36);
        assert!(ising_statistic(2, &[1, 0, 1, 1]).is_err());
    }

    #[test]
    fn single_flip_changes_statistic_by_local_term() {
        let mut rng = RandomStream::new(3, 0);
        let l = 10;
        let mut s: Vec<i8> = (0..l * l).map(|_| if rng.uniform() < 0.5 { 1 } else { -1 }).collect();
        for _ in 0..200 {
            let k = rng.index(l * l);
            let before = ising_statistic(l, &s).unwrap();
            let m = neighbour_sum(l, &s, k / l, k % l) as i64;
            s[k] = -s[k];
            let after = ising_statistic(l, &s).unwrap();
            assert_eq!(after - before, 4 * s[k] as i64 * m);
        }
    }

    #[test]
    fn gibbs_at_zero_coupling_is_fair() {
        let x = ising_simulate(0.0, 50, 1, &mut RandomStream::new(4, 0));
        let (_, s) = x.as_grid().unwrap();
        let plus = s.iter().filter(|&&v| v == 1).count() as f64 / 2500.0;
        assert!((plus - 0.5).abs() < 3.0 * (0.25f64 / 2500.0).sqrt());
    }

    #[test]
    fn simulator_is_deterministic() {
        let a = ising_simulate(0.3, 20, 5, &mut RandomStream::new(9, 2));
        let b = ising_simulate(0.3, 20, 5, &mut RandomStream::new(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn tile_contributions_match_edge_enumeration() {
        for (side, tile) in [(100, 20), (12, 4), (8, 8), (6, 2)] {
            let m = IsingModel::new(side, 3, tile, 3.0).unwrap();
            let x = m.simulate(&[0.35], &mut RandomStream::new(side as u64, 1)).unwrap();
            let (l, s) = x.as_grid().unwrap();
            let per_row = l / tile;
            let mut oracle = vec![0i64; per_row * per_row];
            for r in 0..l {
                for c in 0..l {
                    for (dr, dc) in [(1, 0), (l - 1, 0), (0, 1), (0, l - 1)] {
                        let v = s[r * l + c] as i64 * s[((r + dr) % l) * l + (c + dc) % l] as i64;
                        oracle[(r / tile) * per_row + c / tile] += v;
                    }
                }
            }
            let got = tile_contributions(&x, tile).unwrap();
            assert_eq!(got, oracle, "side {side} tile {tile}");
            assert_eq!(got.iter().sum::<i64>(), ising_statistic(l, s).unwrap());
        }
    }

    #[test]
    fn identity_and_constant_rows() {
        let m = IsingModel::new(12, 3, 4, 3.0).unwrap();
        let x = m.simulate(&[0.4], &mut RandomStream::new(5, 0)).unwrap();
        let (l, s) = x.as_grid().unwrap();
        let full = ising_statistic(l, s).unwrap() as f64;
        let nt = 9;
        let mut rows = vec![(0..nt as u32).collect::<Vec<_>>()];
        rows.extend((0..nt as u32).map(|b| vec![b; nt]));
        let u = IndexMatrix::from_rows(nt, rows).unwrap();
        let mut out = Summaries::new(1);
        m.summarize_resamples(&x, &u, &mut out).unwrap();
        assert_eq!(out.row(0)[0], full);
        // averaging the constant rows weights every tile equally
        let avg: f64 = (1..=nt).map(|r| out.row(r)[0]).sum::<f64>() / nt as f64;
        assert_eq!(avg, full);
    }

    #[test]
    fn resampled_statistic_is_centred_on_the_original() {
        let m = IsingModel::reference();
        let mut rng = RandomStream::new(8, 0);
        let x = m.simulate(&[0.3], &mut rng).unwrap();
        let full = m.summarize(&x).unwrap()[0];
        let u = make_index_matrix(m.block_scheme(), x.shape(), 4000, &mut rng).unwrap();
        let mut out = Summaries::new(1);
        m.summarize_resamples(&x, &u, &mut out).unwrap();
        let c = out.column(0);
        let se = (crate::stats::variance(&c) / c.len() as f64).sqrt();
        assert!((crate::stats::mean(&c) - full).abs() < 4.0 * se);
    }

    #[test]
    fn exchange_matches_enumerated_posterior_on_tiny_grid() {
        let l = 3;
        let m = IsingModel::new(l, 50, 3, 3.0).unwrap();
        let s_obs = 4.0;
        // every configuration of the 3×3 torus, weight exp(θ S / 2)
        let stats: Vec<f64> = (0..1u32 << 9)
            .map(|bits| {
                let spins: Vec<i8> = (0..9).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect();
                ising_statistic(l, &spins).unwrap() as f64
            })
            .collect();
        let grid: Vec<f64> = (0..=3000).map(|i| 0.001 * i as f64).collect();
        let log_post: Vec<f64> = grid
            .iter()
            .map(|&t| {
                let logs: Vec<f64> = stats.iter().map(|s| 0.5 * t * s).collect();
                0.5 * t * s_obs - crate::stats::log_sum_exp(&logs)
            })
            .collect();
        let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_post.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let exact_mean = grid.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>() / z;
        let exact_var = grid.iter().zip(&w).map(|(t, w)| (t - exact_mean).powi(2) * w).sum::<f64>() / z;

        let chain = ising_exchange_sampler(&m, s_obs, 0.3, 0.4, 40_000, &mut RandomStream::new(10, 0)).unwrap();
        let draws = chain.coordinate(0, 2000);
        let iat = crate::diagnostics::iat(&draws).unwrap();
        let se = (exact_var * iat / draws.len() as f64).sqrt();
        let mean = crate::stats::mean(&draws);
        assert!((mean - exact_mean).abs() < 3.0 * se, "{mean} vs {exact_mean} (se {se})");
    }
}
