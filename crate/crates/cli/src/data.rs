//! Models and observed datasets built from a config.

use std::path::Path;

use stratabc_core::models::gaussian::{gaussian_observed, gaussian_simulate, OBSERVED_MEAN};
use stratabc_core::models::gk::gk_simulate;
use stratabc_core::models::ising::ising_simulate;
use stratabc_core::models::lotka_volterra::{reference_obs_times, Interpolation, LvStop};
use stratabc_core::{Dataset, DatasetKind, GaussianModel, GkModel, IsingModel, LvModel, Model, RandomStream};

use crate::config::{ExperimentConfig, InterpId, LvStopId, ModelId};
use crate::error::{CliError, CliResult};

/// A concrete model; samplers use it through [`BuiltModel::as_model`].
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Gaussian(GaussianModel),
    Gk(GkModel),
    Ising(IsingModel),
    Lv(LvModel),
}

impl BuiltModel {
    pub fn as_model(&self) -> &dyn Model {
        match self {
            BuiltModel::Gaussian(m) => m,
            BuiltModel::Gk(m) => m,
            BuiltModel::Ising(m) => m,
            BuiltModel::Lv(m) => m,
        }
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            BuiltModel::Gaussian(_) | BuiltModel::Gk(_) => DatasetKind::Scalar,
            BuiltModel::Ising(_) => DatasetKind::Grid,
            BuiltModel::Lv(_) => DatasetKind::Series,
        }
    }
}

fn lv_times(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * i as f64).collect()
}

/// Model described by a validated config.
pub fn build_model(cfg: &ExperimentConfig) -> CliResult<BuiltModel> {
    let m = &cfg.model;
    let ctx = |e| CliError::core("model", e);
    let need = |v: Option<f64>| v.expect("resolved");
    Ok(match cfg.model_id() {
        ModelId::Gaussian => {
            BuiltModel::Gaussian(GaussianModel::new(m.n_obs.expect("resolved"), need(m.prior_mean), need(m.prior_sd)).map_err(ctx)?)
        }
        ModelId::Gk => BuiltModel::Gk(GkModel::new(m.n_obs.expect("resolved"), need(m.prior_lo), need(m.prior_hi)).map_err(ctx)?),
        ModelId::Ising => BuiltModel::Ising(
            IsingModel::new(m.side.expect("resolved"), m.sweeps.expect("resolved"), m.tile.expect("resolved"), need(m.prior_hi)).map_err(ctx)?,
        ),
        ModelId::Lv => {
            let stop = match m.stop.expect("resolved") {
                LvStopId::Tmax => LvStop::TMax { t_max: need(m.t_max), safety_cap: m.safety_cap.expect("resolved") },
                LvStopId::Reactions => LvStop::Reactions(m.reactions.expect("resolved")),
            };
            let interp = match m.interpolation.expect("resolved") {
                InterpId::Constant => Interpolation::PiecewiseConstant,
                InterpId::Linear => Interpolation::Linear,
            };
            let [x1, x2] = m.initial.expect("resolved");
            let n = m.n_obs.expect("resolved");
            BuiltModel::Lv(
                LvModel::new(x1, x2, lv_times(n), stop, interp, m.block_len.expect("resolved"), need(m.prior_lo), need(m.prior_hi))
                    .map_err(ctx)?,
            )
        }
    })
}

/// Observed dataset: read from file, or simulated at the configured truth.
pub fn observed_data(cfg: &ExperimentConfig, model: &BuiltModel) -> CliResult<Dataset> {
    let d = &cfg.data;
    if let Some(path) = cfg.data_file() {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("cannot read data file {}: {e}", path.display())))?;
        let x = Dataset::from_text(model.kind(), &text).map_err(|e| CliError::config(format!("data file {}: {e}", path.display())))?;
        if x.shape() != model.as_model().data_shape() {
            return Err(CliError::config(format!(
                "data file {} has shape {:?}, the model expects {:?}",
                path.display(),
                x.shape(),
                model.as_model().data_shape()
            )));
        }
        return Ok(x);
    }
    let mut rng = RandomStream::new(d.seed, 0);
    let ctx = |e| CliError::core("simulating observed data", e);
    match model {
        BuiltModel::Gaussian(g) => {
            let truth = d.truth.as_ref().map_or(0.0, |t| t[0]);
            let Dataset::Scalar(mut x) = gaussian_simulate(truth, g.n_obs(), &mut rng) else { unreachable!() };
            if let Some(mean) = d.observed_mean {
                let shift = mean - x.iter().sum::<f64>() / x.len() as f64;
                x.iter_mut().for_each(|v| *v += shift);
            }
            Ok(Dataset::Scalar(x))
        }
        BuiltModel::Gk(g) => {
            let t = d.truth.as_ref().expect("validated");
            gk_simulate(&[t[0], t[1], t[2], t[3]], g.n_obs(), &mut rng).map_err(ctx)
        }
        BuiltModel::Ising(m) => {
            let t = d.truth.as_ref().expect("validated");
            Ok(ising_simulate(t[0], m.side(), d.sweeps.unwrap_or(m.sweeps()), &mut rng))
        }
        BuiltModel::Lv(m) => {
            let t = d.truth.as_ref().expect("validated");
            m.simulate_natural(&[t[0], t[1], t[2]], &mut rng).map_err(ctx)
        }
    }
}

/// Truth and seed of each shipped reference dataset.
pub const REFERENCE_SEEDS: [(&str, u64); 4] = [("gaussian", 1), ("gk", 3), ("ising", 7), ("lv", 11)];

/// The reference observed datasets: Gaussian sample recentred to mean
/// -0.0012, g-and-k at (3, 1, 2, 0.5), Ising at θ = 0.3 after 1000 sweeps,
/// Lotka-Volterra at (1, 0.005, 0.6).
pub fn reference_dataset(name: &str) -> CliResult<Dataset> {
    let seed = REFERENCE_SEEDS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| CliError::config(format!("unknown reference dataset {name:?}")))?;
    let mut rng = RandomStream::new(seed, 0);
    let ctx = |e| CliError::core(format!("reference dataset {name}"), e);
    Ok(match name {
        "gaussian" => gaussian_observed(1000, OBSERVED_MEAN, &mut rng),
        "gk" => gk_simulate(&[3.0, 1.0, 2.0, 0.5], 2000, &mut rng).map_err(ctx)?,
        "ising" => ising_simulate(0.3, 100, 1000, &mut rng),
        _ => {
            debug_assert_eq!(reference_obs_times(), lv_times(32));
            LvModel::reference().simulate_natural(&[1.0, 0.005, 0.6], &mut rng).map_err(ctx)?
        }
    })
}

/// Writes every reference dataset into `dir` as `<name>.txt`.
pub fn write_reference_data(dir: &Path) -> CliResult<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for (name, seed) in REFERENCE_SEEDS {
        let x = reference_dataset(name)?;
        let path = dir.join(format!("{name}.txt"));
        let text = format!("# reference {name} data, seed {seed}\n{}", x.to_text());
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
