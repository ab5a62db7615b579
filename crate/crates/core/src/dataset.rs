//! Simulator output containers.

use crate::error::{AbcError, Result};

/// Output of one simulator run, or an observed dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// An iid scalar sample.
    Scalar(Vec<f64>),
    /// Two series observed on a shared time grid.
    Series { x1: Vec<f64>, x2: Vec<f64>, times: Vec<f64> },
    /// A square spin grid stored row-major, entries in {-1, +1}.
    Grid { side: usize, spins: Vec<i8> },
}

/// Shape descriptor used to validate resampling schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Len(usize),
    Square(usize),
}

impl Dataset {
    pub fn shape(&self) -> Shape {
        match self {
            Dataset::Scalar(v) => Shape::Len(v.len()),
            Dataset::Series { x1, .. } => Shape::Len(x1.len()),
            Dataset::Grid { side, .. } => Shape::Square(*side),
        }
    }

    /// Number of observations (sites for a grid).
    pub fn n_obs(&self) -> usize {
        match self.shape() {
            Shape::Len(n) => n,
            Shape::Square(l) => l * l,
        }
    }

    pub fn grid(side: usize, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != side * side {
            return Err(AbcError::Data(format!(
                "grid of side {side} needs {} spins, got {}",
                side * side,
                spins.len()
            )));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(AbcError::Data(format!("spin value {bad} is not +1 or -1")));
        }
        Ok(Dataset::Grid { side, spins })
    }

    pub fn series(x1: Vec<f64>, x2: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        if x1.len() != x2.len() || x1.len() != times.len() {
            return Err(AbcError::Data("series and time grid lengths differ".into()));
        }
        Ok(Dataset::Series { x1, x2, times })
    }

    pub fn as_scalar(&self) -> Result<&[f64]> {
        match self {
            Dataset::Scalar(v) => Ok(v),
            _ => Err(AbcError::Data("expected a scalar sample".into())),
        }
    }

    pub fn as_series(&self) -> Result<(&[f64], &[f64])> {
        match self {
            Dataset::Series { x1, x2, .. } => Ok((x1, x2)),
            _ => Err(AbcError::Data("expected a bivariate series".into())),
        }
    }

    pub fn as_grid(&self) -> Result<(usize, &[i8])> {
        match self {
            Dataset::Grid { side, spins } => Ok((*side, spins)),
            _ => Err(AbcError::Data("expected a spin grid".into())),
        }
    }

    /// Plain-text form: one column per series, or one grid row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Dataset::Scalar(v) => {
                for x in v {
                    out.push_str(&format!("{x:.17e}\n"));
                }
            }
            Dataset::Series { x1, x2, times } => {
                for i in 0..x1.len() {
                    out.push_str(&format!("{}\t{}\t{}\n", times[i], x1[i], x2[i]));
                }
            }
            Dataset::Grid { side, spins } => {
                for row in spins.chunks(*side) {
                    let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
                    out.push_str(&line.join(" "));
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Parses text written by [`Dataset::to_text`]; `kind` selects the layout.
    /// Lines starting with `#` are skipped.
    pub fn from_text(kind: DatasetKind, text: &str) -> Result<Self> {
        let rows: Vec<Vec<&str>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().collect())
            .collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| AbcError::Data(format!("not a number: {s:?}")))
        };
        match kind {
            DatasetKind::Scalar => {
                let v = rows
                    .iter()
                    .map(|r| if r.len() == 1 { num(r[0]) } else { Err(AbcError::Data("expected one column".into())) })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Dataset::Scalar(v))
            }
            DatasetKind::Series => {
                let (mut t, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
                for r in &rows {
                    if r.len() != 3 {
                        return Err(AbcError::Data("expected columns: time x1 x2".into()));
                    }
                    t.push(num(r[0])?);
                    a.push(num(r[1])?);
                    b.push(num(r[2])?);
                }
                Dataset::series(a, b, t)
            }
            DatasetKind::Grid => {
                let side = rows.len();
                let mut spins = Vec::with_capacity(side * side);
                for r in &rows {
                    if r.len() != side {
                        return Err(AbcError::Data("grid must be square".into()));
                    }
                    for s in r {
                        let v: i8 = s.parse().map_err(|_| AbcError::Data(format!("bad spin {s:?}")))?;
                        spins.push(v);
                    }
                }
                Dataset::grid(side, spins)
            }
        }
    }
}

/// Layout selector for [`Dataset::from_text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Scalar,
    Series,
    Grid,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let s = Dataset::Scalar(vec![0.1, -2.5, 3.0]);
        assert_eq!(Dataset::from_text(DatasetKind::Scalar, &s.to_text()).unwrap(), s);
        let ts = Dataset::series(vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(Dataset::from_text(DatasetKind::Series, &ts.to_text()).unwrap(), ts);
        let g = Dataset::grid(2, vec![1, -1, -1, 1]).unwrap();
        assert_eq!(Dataset::from_text(DatasetKind::Grid, &g.to_text()).unwrap(), g);
    }

    #[test]
    fn invalid_spin_rejected() {
        assert!(Dataset::grid(1, vec![0]).is_err());
        assert!(Dataset::grid(2, vec![1, 1, 1]).is_err());
    }
}
