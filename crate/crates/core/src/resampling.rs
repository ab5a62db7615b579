//! Bootstrap index matrices and dataset reconstruction.
//!
//! An [`IndexMatrix`] is drawn once per sampler run and never modified, so
//! every proposal is resampled with the same pattern. Units are single
//! observations (iid), contiguous time blocks, or square grid tiles.

use crate::dataset::{Dataset, Shape};
use crate::error::{AbcError, Result};
use crate::rng::RandomStream;

/// How a dataset is cut into resampling units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockScheme {
    Iid,
    TimeBlocks { block_len: usize, overlapping: bool },
    GridBlocks { h: usize, w: usize },
}

impl BlockScheme {
    /// Returns `(candidate units, slots per resample)` for a dataset shape.
    pub fn units(&self, shape: Shape) -> Result<(usize, usize)> {
        match (*self, shape) {
            (BlockScheme::Iid, Shape::Len(n)) => nonzero(n).map(|n| (n, n)),
            (BlockScheme::Iid, Shape::Square(l)) => nonzero(l * l).map(|n| (n, n)),
            (BlockScheme::TimeBlocks { block_len: b, overlapping }, Shape::Len(n)) => {
                if b == 0 || b > n {
                    return Err(AbcError::Config(format!("block length {b} invalid for {n} observations")));
                }
                if overlapping {
                    Ok((n - b + 1, n.div_ceil(b)))
                } else if n % b != 0 {
                    Err(AbcError::Config(format!(
                        "block length {b} does not divide {n} observations"
                    )))
                } else {
                    Ok((n / b, n / b))
                }
            }
            (BlockScheme::GridBlocks { h, w }, Shape::Square(l)) => {
                if h == 0 || w == 0 || l % h != 0 || l % w != 0 {
                    return Err(AbcError::Config(format!(
                        "tile {h}x{w} does not divide a {l}x{l} grid"
                    )));
                }
                let n = (l / h) * (l / w);
                Ok((n, n))
            }
            (s, sh) => Err(AbcError::Config(format!("scheme {s:?} incompatible with data shape {sh:?}"))),
        }
    }
}

fn nonzero(n: usize) -> Result<usize> {
    if n == 0 {
        Err(AbcError::Data("empty dataset".into()))
    } else {
        Ok(n)
    }
}

/// `R` rows of unit indices (zero-based), drawn uniformly with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    rows: usize,
    cols: usize,
    n_units: usize,
    data: Vec<u32>,
}

impl IndexMatrix {
    pub fn from_rows(n_units: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(AbcError::Dimension { expected: cols, found: r.len() });
            }
            if let Some(&bad) = r.iter().find(|&&i| i as usize >= n_units) {
                return Err(AbcError::Parameter(format!("unit index {bad} out of range")));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, n_units, data })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Draws an `R`-row index matrix for `scheme` on data of the given shape.
pub fn make_index_matrix(scheme: BlockScheme, shape: Shape, r: usize, rng: &mut RandomStream) -> Result<IndexMatrix> {
    if r == 0 {
        return Err(AbcError::Parameter("number of resamples must be at least 1".into()));
    }
    let (n_units, cols) = scheme.units(shape)?;
    let data = (0..r * cols).map(|_| rng.index(n_units) as u32).collect();
    Ok(IndexMatrix { rows: r, cols, n_units, data })
}

/// Rebuilds a dataset from one index-matrix row.
pub fn resample_dataset(x: &Dataset, row: &[u32], scheme: BlockScheme) -> Result<Dataset> {
    let mut out = x.clone();
    resample_into(x, row, scheme, &mut out)?;
    Ok(out)
}

/// As [`resample_dataset`], writing into a buffer of the same shape as `x`.
pub fn resample_into(x: &Dataset, row: &[u32], scheme: BlockScheme, out: &mut Dataset) -> Result<()> {
    let (n_units, cols) = scheme.units(x.shape())?;
    if row.len() != cols {
        return Err(AbcError::Dimension { expected: cols, found: row.len() });
    }
    if row.iter().any(|&i| i as usize >= n_units) {
        return Err(AbcError::Invariant("index matrix entry out of range".into()));
    }
    match (scheme, x, out) {
        (BlockScheme::Iid, Dataset::Scalar(src), Dataset::Scalar(dst)) => {
            dst.clear();
            dst.extend(row.iter().map(|&i| src[i as usize]));
        }
        (BlockScheme::Iid, Dataset::Series { x1, x2, .. }, Dataset::Series { x1: y1, x2: y2, .. }) => {
            for (k, &i) in row.iter().enumerate() {
                y1[k] = x1[i as usize];
                y2[k] = x2[i as usize];
            }
        }
        (BlockScheme::TimeBlocks { block_len: b, overlapping }, Dataset::Series { x1, x2, .. }, Dataset::Series { x1: y1, x2: y2, .. }) => {
            let n = x1.len();
            for (slot, &i) in row.iter().enumerate() {
                let start = if overlapping { i as usize } else { i as usize * b };
                let dst = slot * b;
                let len = b.min(n - dst);
                y1[dst..dst + len].copy_from_slice(&x1[start..start + len]);
                y2[dst..dst + len].copy_from_slice(&x2[start..start + len]);
            }
        }
        (BlockScheme::TimeBlocks { block_len: b, overlapping }, Dataset::Scalar(src), Dataset::Scalar(dst)) => {
            let n = src.len();
            dst.resize(n, 0.0);
            for (slot, &i) in row.iter().enumerate() {
                let start = if overlapping { i as usize } else { i as usize * b };
                let d = slot * b;
                let len = b.min(n - d);
                dst[d..d + len].copy_from_slice(&src[start..start + len]);
            }
        }
        (BlockScheme::Iid, Dataset::Grid { spins, .. }, Dataset::Grid { spins: dst, .. }) => {
            for (k, &i) in row.iter().enumerate() {
                dst[k] = spins[i as usize];
            }
        }
        (BlockScheme::GridBlocks { h, w }, Dataset::Grid { side, spins }, Dataset::Grid { spins: dst, .. }) => {
            let l = *side;
            let per_row = l / w;
            for (slot, &t) in row.iter().enumerate() {
                let (sr, sc) = (slot / per_row * h, slot % per_row * w);
                let (tr, tc) = (t as usize / per_row * h, t as usize % per_row * w);
                for k in 0..h {
                    let d = (sr + k) * l + sc;
                    let s = (tr + k) * l + tc;
                    dst[d..d + w].copy_from_slice(&spins[s..s + w]);
                }
            }
        }
        _ => return Err(AbcError::Config(format!("scheme {scheme:?} incompatible with dataset or buffer"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv_series(n: usize) -> Dataset {
        let x1 = (0..n).map(|i| i as f64).collect();
        let x2 = (0..n).map(|i| 100.0 + i as f64).collect();
        let t = (0..n).map(|i| 2.0 * i as f64).collect();
        Dataset::series(x1, x2, t).unwrap()
    }

    #[test]
    fn single_unit_iid() {
        let mut rng = RandomStream::new(1, 0);
        let u = make_index_matrix(BlockScheme::Iid, Shape::Len(1), 17, &mut rng).unwrap();
        assert!(u.rows().all(|r| r == [0]));
    }

    #[test]
    fn one_block_reconstructs_series() {
        let x = lv_series(32);
        let scheme = BlockScheme::TimeBlocks { block_len: 32, overlapping: false };
        let mut rng = RandomStream::new(2, 0);
        let u = make_index_matrix(scheme, x.shape(), 10, &mut rng).unwrap();
        for row in u.rows() {
            assert_eq!(resample_dataset(&x, row, scheme).unwrap(), x);
        }
    }

    #[test]
    fn iid_index_frequency_matches_binomial() {
        let mut rng = RandomStream::new(3, 0);
        let u = make_index_matrix(BlockScheme::Iid, Shape::Len(1000), 500, &mut rng).unwrap();
        let total = (u.n_rows() * u.n_cols()) as f64;
        let hits = u.rows().flatten().filter(|&&i| i == 0).count() as f64;
        let p = 1.0 / 1000.0;
        let se = (p * (1.0 - p) / total).sqrt();
        assert!((hits / total - p).abs() < 3.0 * se, "freq {} vs {p}", hits / total);
    }

    #[test]
    fn identity_and_constant_rows() {
        let x = Dataset::Scalar(vec![5.0, 6.0, 7.0]);
        assert_eq!(resample_dataset(&x, &[0, 1, 2], BlockScheme::Iid).unwrap(), x);
        assert_eq!(
            resample_dataset(&x, &[0, 0, 0], BlockScheme::Iid).unwrap(),
            Dataset::Scalar(vec![5.0; 3])
        );
    }

    #[test]
    fn lv_block_two_repeated() {
        let x = lv_series(32);
        let scheme = BlockScheme::TimeBlocks { block_len: 8, overlapping: false };
        // one-based block 2 is zero-based unit 1
        let y = resample_dataset(&x, &[1, 1, 1, 1], scheme).unwrap();
        let (a, b) = y.as_series().unwrap();
        let block1: Vec<f64> = (8..16).map(|i| i as f64).collect();
        let block2: Vec<f64> = (108..116).map(|i| i as f64).collect();
        for k in 0..4 {
            assert_eq!(&a[8 * k..8 * k + 8], block1.as_slice());
            assert_eq!(&b[8 * k..8 * k + 8], block2.as_slice());
        }
    }

    #[test]
    fn block_length_must_divide() {
        let scheme = BlockScheme::TimeBlocks { block_len: 7, overlapping: false };
        assert!(matches!(scheme.units(Shape::Len(32)), Err(AbcError::Config(_))));
        let ov = BlockScheme::TimeBlocks { block_len: 7, overlapping: true };
        assert_eq!(ov.units(Shape::Len(32)).unwrap(), (26, 5));
    }

    #[test]
    fn grid_tiles_raster_order() {
        // 4x4 grid, 2x2 tiles: tile t has every spin set by its index parity
        let mut spins = vec![0i8; 16];
        for r in 0..4 {
            for c in 0..4 {
                let t = (r / 2) * 2 + c / 2;
                spins[r * 4 + c] = if t == 3 { -1 } else { 1 };
            }
        }
        let x = Dataset::grid(4, spins).unwrap();
        let scheme = BlockScheme::GridBlocks { h: 2, w: 2 };
        let y = resample_dataset(&x, &[3, 0, 0, 3], scheme).unwrap();
        let (_, s) = y.as_grid().unwrap();
        assert_eq!(s, &[-1, -1, 1, 1, -1, -1, 1, 1, 1, 1, -1, -1, 1, 1, -1, -1]);
        assert_eq!(resample_dataset(&x, &[0, 1, 2, 3], scheme).unwrap(), x);
    }

    #[test]
    fn same_matrix_same_resamples() {
        let x = Dataset::Scalar((0..50).map(|i| (i as f64).sin()).collect());
        let mk = || make_index_matrix(BlockScheme::Iid, x.shape(), 20, &mut RandomStream::new(9, 4)).unwrap();
        let (u, v) = (mk(), mk());
        assert_eq!(u, v);
        for (a, b) in u.rows().zip(v.rows()) {
            assert_eq!(resample_dataset(&x, a, BlockScheme::Iid).unwrap(), resample_dataset(&x, b, BlockScheme::Iid).unwrap());
        }
    }

    proptest! {
        #[test]
        fn output_shape_matches_input(seed in 0u64..1000, b in prop::sample::select(vec![1usize, 2, 4, 8, 16, 32])) {
            let x = lv_series(32);
            let scheme = BlockScheme::TimeBlocks { block_len: b, overlapping: seed % 2 == 0 };
            let mut rng = RandomStream::new(seed, 0);
            let u = make_index_matrix(scheme, x.shape(), 3, &mut rng).unwrap();
            for row in u.rows() {
                let y = resample_dataset(&x, row, scheme).unwrap();
                prop_assert_eq!(y.shape(), x.shape());
                // pairing: both series are gathered from the same times
                let (a, b2) = y.as_series().unwrap();
                for (p, q) in a.iter().zip(b2) {
                    prop_assert_eq!(q - p, 100.0);
                }
            }
        }
    }
}
