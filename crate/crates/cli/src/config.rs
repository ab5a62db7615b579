//! Experiment configuration.
//!
//! Configs are TOML. Unknown keys are rejected, defaults are filled in by
//! [`resolve`], and every problem found is reported at once.

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use stratabc_core::models::gaussian::OBSERVED_MEAN;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Gaussian,
    Gk,
    Ising,
    Lv,
}

impl ModelId {
    pub fn dim(self) -> usize {
        match self {
            ModelId::Gaussian | ModelId::Ising => 1,
            ModelId::Gk => 4,
            ModelId::Lv => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerId {
    Pm,
    R,
    Rs,
    Xrs,
    Smc,
    Exchange,
    Exact,
}

impl SamplerId {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerId::Pm => "pm",
            SamplerId::R => "r",
            SamplerId::Rs => "rs",
            SamplerId::Xrs => "xrs",
            SamplerId::Smc => "smc",
            SamplerId::Exchange => "exchange",
            SamplerId::Exact => "exact",
        }
    }

    pub fn is_mcmc(self) -> bool {
        self != SamplerId::Smc
    }

    /// Whether a later stage can pick up this stage's `δ` and `Σ`.
    pub fn hands_off(self) -> bool {
        !matches!(self, SamplerId::Exchange | SamplerId::Exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    #[default]
    Gaussian,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMethod {
    #[default]
    Identity,
    /// Squared MADs of prior-predictive summaries.
    Pilot,
    /// `diag` as given.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LvStopId {
    Tmax,
    Reactions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpId {
    Constant,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: Option<ModelId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_obs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tile: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<[i64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<LvStopId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reactions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<InterpId>,
}

/// Observed data: a file, or a simulation at `truth` (natural scale).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian model: shift the simulated sample to this mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_mean: Option<f64>,
    /// Ising model: Gibbs sweeps used for the observed grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default)]
    pub method: ScalingMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub sampler: SamplerId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<usize>,
    /// Stratum breakpoints as fractions of `δ`; empty for a single stratum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<f64>>,
    /// Percentile in (0, 100].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_burnin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tune_delta: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_variances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapt_interval: Option<usize>,
    /// Starting point on the natural scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    /// Start from the previous stage's final state, `δ`, `Σ` and proposal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inherit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl StageConfig {
    pub fn new(sampler: SamplerId) -> Self {
        Self {
            sampler,
            iterations: None,
            burn: None,
            delta: None,
            kernel: None,
            m: None,
            r: None,
            r1: None,
            r2: None,
            strata: None,
            psi: None,
            period: None,
            k_burnin: None,
            tune_delta: None,
            proposal_variances: None,
            adapt: None,
            adapt_interval: None,
            init: None,
            inherit: None,
            particles: None,
            gamma: None,
            ess_min: None,
            stop_rate: None,
            max_iter: None,
        }
    }

    fn present(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("iterations", self.iterations.is_some()),
            ("burn", self.burn.is_some()),
            ("delta", self.delta.is_some()),
            ("kernel", self.kernel.is_some()),
            ("m", self.m.is_some()),
            ("r", self.r.is_some()),
            ("r1", self.r1.is_some()),
            ("r2", self.r2.is_some()),
            ("strata", self.strata.is_some()),
            ("psi", self.psi.is_some()),
            ("period", self.period.is_some()),
            ("k_burnin", self.k_burnin.is_some()),
            ("tune_delta", self.tune_delta.is_some()),
            ("proposal_variances", self.proposal_variances.is_some()),
            ("adapt", self.adapt.is_some()),
            ("adapt_interval", self.adapt_interval.is_some()),
            ("init", self.init.is_some()),
            ("inherit", self.inherit.is_some()),
            ("particles", self.particles.is_some()),
            ("gamma", self.gamma.is_some()),
            ("ess_min", self.ess_min.is_some()),
            ("stop_rate", self.stop_rate.is_some()),
            ("max_iter", self.max_iter.is_some()),
        ]
    }
}

/// Keys each sampler accepts.
fn stage_keys(s: SamplerId) -> &'static [&'static str] {
    const MCMC: [&str; 7] = ["iterations", "burn", "proposal_variances", "adapt", "adapt_interval", "init", "inherit"];
    match s {
        SamplerId::Pm => &["iterations", "burn", "proposal_variances", "adapt", "adapt_interval", "init", "inherit", "delta", "kernel", "m"],
        SamplerId::R => &[
            "iterations",
            "burn",
            "proposal_variances",
            "adapt",
            "adapt_interval",
            "init",
            "inherit",
            "delta",
            "kernel",
            "r",
            "psi",
            "period",
            "k_burnin",
            "tune_delta",
        ],
        SamplerId::Rs | SamplerId::Xrs => &[
            "iterations",
            "burn",
            "proposal_variances",
            "adapt",
            "adapt_interval",
            "init",
            "inherit",
            "delta",
            "kernel",
            "r1",
            "r2",
            "strata",
        ],
        SamplerId::Exact => &MCMC,
        SamplerId::Exchange => &["iterations", "burn", "proposal_variances", "init", "inherit"],
        SamplerId::Smc => &["particles", "gamma", "ess_min", "stop_rate", "max_iter", "kernel"],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Mc,
    Res,
    Rs,
    Xrs,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub kind: CurveKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<f64>>,
}

impl CurveConfig {
    pub fn new(kind: CurveKind) -> Self {
        Self { kind, label: None, delta: None, kernel: None, m: None, r: None, r1: None, r2: None, strata: None }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("{:?}", self.kind).to_lowercase())
    }
}

/// Likelihood curves over an equispaced grid of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub coordinate: usize,
    /// Natural-scale values of the other coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(default)]
    pub estimators: Vec<CurveConfig>,
}

fn default_points() -> usize {
    50
}

fn default_reps() -> usize {
    1000
}

fn default_seed() -> u64 {
    1
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Relative to the output root.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn model_id(&self) -> ModelId {
        self.model.id.expect("validated config has a model id")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(&self.name))
    }

    /// Absolute or `base_dir`-relative data file.
    pub fn data_file(&self) -> Option<PathBuf> {
        self.data.file.as_ref().map(|f| if f.is_absolute() { f.clone() } else { self.base_dir.join(f) })
    }

    /// TOML form of the resolved config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Reads, resolves and validates a config file.
pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
    cfg.base_dir = base_dir.to_path_buf();
    resolve(&mut cfg);
    let errors = validate(&cfg);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errors))
    }
}

fn fill<T: Clone>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Fills every default that applies to the chosen model and samplers.
pub fn resolve(cfg: &mut ExperimentConfig) {
    let Some(id) = cfg.model.id else { return };
    let m = &mut cfg.model;
    match id {
        ModelId::Gaussian => {
            fill(&mut m.n_obs, 1000);
            fill(&mut m.prior_mean, 0.1);
            fill(&mut m.prior_sd, 0.2);
            if cfg.data.file.is_none() {
                fill(&mut cfg.data.observed_mean, OBSERVED_MEAN);
            }
        }
        ModelId::Gk => {
            fill(&mut m.n_obs, 2000);
            fill(&mut m.prior_lo, -30.0);
            fill(&mut m.prior_hi, 30.0);
        }
        ModelId::Ising => {
            fill(&mut m.side, 100);
            fill(&mut m.sweeps, 50);
            fill(&mut m.tile, 20);
            fill(&mut m.prior_hi, 3.0);
            if cfg.data.file.is_none() {
                fill(&mut cfg.data.sweeps, 1000);
            }
        }
        ModelId::Lv => {
            fill(&mut m.n_obs, 32);
            fill(&mut m.block_len, 8);
            fill(&mut m.prior_lo, -6.0);
            fill(&mut m.prior_hi, 2.0);
            fill(&mut m.initial, [50, 100]);
            fill(&mut m.stop, LvStopId::Tmax);
            fill(&mut m.interpolation, InterpId::Constant);
            match m.stop {
                Some(LvStopId::Tmax) => {
                    fill(&mut m.t_max, 2.0 * m.n_obs.unwrap_or(32) as f64);
                    fill(&mut m.safety_cap, stratabc_core::models::lotka_volterra::DEFAULT_SAFETY_CAP);
                }
                _ => fill(&mut m.reactions, stratabc_core::models::lotka_volterra::EXPENSIVE_REACTIONS),
            }
        }
    }
    if cfg.scaling.method == ScalingMethod::Pilot {
        fill(&mut cfg.scaling.pilot_draws, 5000);
        fill(&mut cfg.scaling.pilot_seed, cfg.seed);
    }
    let gaussian = id == ModelId::Gaussian;
    let mut prev: Option<SamplerId> = None;
    for st in &mut cfg.stages {
        let s = st.sampler;
        if s.is_mcmc() {
            fill(&mut st.iterations, 10_000);
            // The Gaussian toy keeps 9000 of 10000 draws with a fixed walk.
            fill(&mut st.burn, st.iterations.unwrap_or(0) / if gaussian { 10 } else { 5 });
            fill(&mut st.inherit, prev.is_some_and(SamplerId::hands_off));
            let inherit = st.inherit == Some(true);
            if s != SamplerId::Exchange {
                fill(&mut st.adapt, !gaussian);
                fill(&mut st.adapt_interval, stratabc_core::samplers::abc_mcmc::ADAPT_INTERVAL);
            }
            if gaussian && !inherit {
                fill(&mut st.proposal_variances, vec![0.01]);
                fill(&mut st.init, vec![0.0]);
            }
            match s {
                SamplerId::Pm => {
                    fill(&mut st.kernel, KernelId::Gaussian);
                    fill(&mut st.m, 500);
                    if gaussian && !inherit {
                        fill(&mut st.delta, 3e-5);
                    }
                }
                SamplerId::R => {
                    fill(&mut st.kernel, KernelId::Gaussian);
                    fill(&mut st.r, 500);
                    fill(&mut st.psi, 5.0);
                    fill(&mut st.k_burnin, 0);
                    fill(&mut st.tune_delta, !gaussian);
                    if gaussian && !inherit {
                        fill(&mut st.delta, 3e-5);
                    }
                }
                SamplerId::Rs | SamplerId::Xrs => {
                    fill(&mut st.kernel, KernelId::Gaussian);
                    fill(&mut st.r1, 500);
                    fill(&mut st.r2, 500);
                    fill(&mut st.strata, vec![0.5, 1.0]);
                    if gaussian && !inherit {
                        fill(&mut st.delta, 3e-4);
                    }
                }
                _ => {}
            }
        } else {
            fill(&mut st.particles, 1000);
            fill(&mut st.gamma, 0.95);
            fill(&mut st.ess_min, st.particles.unwrap_or(0) as f64 / 2.0);
            fill(&mut st.stop_rate, 0.01);
            fill(&mut st.max_iter, 1000);
            fill(&mut st.kernel, KernelId::Gaussian);
        }
        prev = Some(s);
    }
    if let Some(sw) = &mut cfg.sweep {
        if sw.estimators.is_empty() && gaussian {
            let mut mc = CurveConfig::new(CurveKind::Mc);
            mc.delta = Some(3e-5);
            let mut res = CurveConfig::new(CurveKind::Res);
            res.delta = Some(3e-5);
            let mut rs = CurveConfig::new(CurveKind::Rs);
            rs.delta = Some(3e-4);
            sw.estimators = vec![mc, res, rs, CurveConfig::new(CurveKind::Exact)];
        }
        for e in &mut sw.estimators {
            if e.kind != CurveKind::Exact {
                fill(&mut e.kernel, KernelId::Gaussian);
            }
            match e.kind {
                CurveKind::Mc => fill(&mut e.m, 500),
                CurveKind::Res => fill(&mut e.r, 500),
                CurveKind::Rs | CurveKind::Xrs => {
                    fill(&mut e.r1, 500);
                    fill(&mut e.r2, 500);
                    fill(&mut e.strata, vec![0.5, 1.0]);
                }
                CurveKind::Exact => {}
            }
        }
    }
}

fn positive(errors: &mut Vec<String>, what: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x > 0.0 && x.is_finite()) {
            errors.push(format!("{what} must be positive and finite, got {x}"));
        }
    }
}

fn at_least_one(errors: &mut Vec<String>, what: &str, v: Option<usize>) {
    if v == Some(0) {
        errors.push(format!("{what} must be at least 1"));
    }
}

fn check_strata(errors: &mut Vec<String>, what: &str, strata: &Option<Vec<f64>>) {
    if let Some(b) = strata {
        if b.iter().any(|x| !(*x > 0.0 && x.is_finite())) || b.windows(2).any(|w| w[0] >= w[1]) {
            errors.push(format!("{what}: breakpoints must be positive and strictly increasing, got {b:?}"));
        }
    }
}

/// Every problem with a resolved config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut e = Vec::new();
    let Some(id) = cfg.model.id else {
        e.push("model.id is required (gaussian, gk, ising or lv)".into());
        return e;
    };
    let dim = id.dim();
    let m = &cfg.model;

    let allowed: &[&str] = match id {
        ModelId::Gaussian => &["n_obs", "prior_mean", "prior_sd"],
        ModelId::Gk => &["n_obs", "prior_lo", "prior_hi"],
        ModelId::Ising => &["side", "sweeps", "tile", "prior_hi"],
        ModelId::Lv => &["n_obs", "prior_lo", "prior_hi", "block_len", "initial", "stop", "t_max", "safety_cap", "reactions", "interpolation"],
    };
    let model_keys = [
        ("n_obs", m.n_obs.is_some()),
        ("prior_mean", m.prior_mean.is_some()),
        ("prior_sd", m.prior_sd.is_some()),
        ("prior_lo", m.prior_lo.is_some()),
        ("prior_hi", m.prior_hi.is_some()),
        ("side", m.side.is_some()),
        ("sweeps", m.sweeps.is_some()),
        ("tile", m.tile.is_some()),
        ("block_len", m.block_len.is_some()),
        ("initial", m.initial.is_some()),
        ("stop", m.stop.is_some()),
        ("t_max", m.t_max.is_some()),
        ("safety_cap", m.safety_cap.is_some()),
        ("reactions", m.reactions.is_some()),
        ("interpolation", m.interpolation.is_some()),
    ];
    for (k, set) in model_keys {
        if set && !allowed.contains(&k) {
            e.push(format!("model.{k} does not apply to model {id:?}"));
        }
    }
    match id {
        ModelId::Gaussian => {
            at_least_one(&mut e, "model.n_obs", m.n_obs);
            positive(&mut e, "model.prior_sd", m.prior_sd);
        }
        ModelId::Gk => {
            if m.n_obs.is_some_and(|n| n < 8) {
                e.push("model.n_obs must be at least 8 for g-and-k".into());
            }
        }
        ModelId::Ising => {
            at_least_one(&mut e, "model.side", m.side);
            at_least_one(&mut e, "model.sweeps", m.sweeps);
            at_least_one(&mut e, "model.tile", m.tile);
            positive(&mut e, "model.prior_hi", m.prior_hi);
            if let (Some(s), Some(t)) = (m.side, m.tile) {
                if t > 0 && s % t != 0 {
                    e.push(format!("model.tile = {t} does not divide the grid side {s}"));
                }
            }
        }
        ModelId::Lv => {
            if m.n_obs.is_some_and(|n| n < 3) {
                e.push("model.n_obs must be at least 3".into());
            }
            at_least_one(&mut e, "model.block_len", m.block_len);
            if let (Some(n), Some(b)) = (m.n_obs, m.block_len) {
                if b > 0 && n % b != 0 {
                    e.push(format!("model.block_len = {b} does not divide n_obs = {n} (non-overlapping blocks)"));
                }
            }
            if let Some([a, b]) = m.initial {
                if a < 0 || b < 0 {
                    e.push("model.initial populations must be non-negative".into());
                }
            }
            match m.stop {
                Some(LvStopId::Tmax) => {
                    if m.reactions.is_some() {
                        e.push("model.reactions requires stop = \"reactions\"".into());
                    }
                    positive(&mut e, "model.t_max", m.t_max);
                    if let (Some(t), Some(n)) = (m.t_max, m.n_obs) {
                        if t < 2.0 * (n as f64 - 1.0) {
                            e.push(format!("model.t_max = {t} ends before the last observation at {}", 2 * (n - 1)));
                        }
                    }
                }
                Some(LvStopId::Reactions) => {
                    if m.t_max.is_some() || m.safety_cap.is_some() {
                        e.push("model.t_max and model.safety_cap require stop = \"tmax\"".into());
                    }
                    if m.reactions == Some(0) {
                        e.push("model.reactions must be at least 1".into());
                    }
                }
                None => {}
            }
        }
    }
    if let (Some(lo), Some(hi)) = (m.prior_lo, m.prior_hi) {
        if !(lo < hi) {
            e.push(format!("model.prior_lo = {lo} must be below prior_hi = {hi}"));
        }
    }

    let out = cfg.output_dir();
    if out.is_absolute() || out.components().any(|c| matches!(c, Component::ParentDir)) {
        e.push(format!("output_dir {} must be a relative path inside the output root", out.display()));
    }

    let d = &cfg.data;
    match (&d.file, &d.truth) {
        (Some(_), Some(_)) => e.push("data: give either file or truth, not both".into()),
        (None, None) if id != ModelId::Gaussian => e.push("data: a file or a truth to simulate from is required".into()),
        _ => {}
    }
    if let Some(t) = &d.truth {
        if t.len() != dim {
            e.push(format!("data.truth has {} values, model {id:?} has {dim} parameters", t.len()));
        }
    }
    if d.observed_mean.is_some() && id != ModelId::Gaussian {
        e.push("data.observed_mean applies to the gaussian model only".into());
    }
    if d.observed_mean.is_some() && d.file.is_some() {
        e.push("data.observed_mean cannot be combined with data.file".into());
    }
    if d.sweeps.is_some() && id != ModelId::Ising {
        e.push("data.sweeps applies to the ising model only".into());
    }
    at_least_one(&mut e, "data.sweeps", d.sweeps);
    if let Some(f) = cfg.data_file() {
        if !f.is_file() {
            e.push(format!("data.file {} does not exist", f.display()));
        }
    }

    let n_s = match id {
        ModelId::Gaussian | ModelId::Ising => 1,
        ModelId::Gk => 4,
        ModelId::Lv => 9,
    };
    let sc = &cfg.scaling;
    match sc.method {
        ScalingMethod::Fixed => match &sc.diag {
            None => e.push("scaling.diag is required with method = \"fixed\"".into()),
            Some(v) if v.len() != n_s => e.push(format!("scaling.diag has {} entries, model {id:?} has {n_s} summaries", v.len())),
            Some(v) if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) => e.push("scaling.diag entries must be positive".into()),
            _ => {}
        },
        _ if sc.diag.is_some() => e.push("scaling.diag requires method = \"fixed\"".into()),
        _ => {}
    }
    if sc.method != ScalingMethod::Pilot && (sc.pilot_draws.is_some() || sc.pilot_seed.is_some()) {
        e.push("scaling.pilot_draws and pilot_seed require method = \"pilot\"".into());
    }
    if sc.pilot_draws.is_some_and(|n| n < 2) {
        e.push("scaling.pilot_draws must be at least 2".into());
    }

    if cfg.stages.is_empty() && cfg.sweep.is_none() {
        e.push("at least one [[stages]] entry or a [sweep] table is required".into());
    }
    for (i, st) in cfg.stages.iter().enumerate() {
        validate_stage(&mut e, cfg, i, st, id, dim);
    }
    if let Some(sw) = &cfg.sweep {
        validate_sweep(&mut e, sw, id, dim);
    }
    e
}

fn validate_stage(e: &mut Vec<String>, cfg: &ExperimentConfig, i: usize, st: &StageConfig, id: ModelId, dim: usize) {
    let s = st.sampler;
    let tag = format!("stages[{i}] ({})", s.as_str());
    let keys = stage_keys(s);
    for (k, set) in st.present() {
        if set && !keys.contains(&k) {
            e.push(format!("{tag}: key {k} does not apply to this sampler"));
        }
    }
    match s {
        SamplerId::Exchange if id != ModelId::Ising => e.push(format!("{tag}: the exchange algorithm needs the ising model")),
        SamplerId::Exact if id != ModelId::Gaussian => e.push(format!("{tag}: an exact likelihood is available for the gaussian model only")),
        _ => {}
    }
    let inherit = st.inherit == Some(true);
    if inherit {
        match i.checked_sub(1).map(|p| cfg.stages[p].sampler) {
            None => e.push(format!("{tag}: inherit needs a previous stage")),
            Some(p) if !p.hands_off() => e.push(format!("{tag}: cannot inherit from a {} stage", p.as_str())),
            _ => {}
        }
    }
    if s.is_mcmc() {
        at_least_one(e, &format!("{tag} iterations"), st.iterations);
        if let (Some(n), Some(b)) = (st.iterations, st.burn) {
            if b >= n {
                e.push(format!("{tag}: burn = {b} leaves no draws out of {n} iterations"));
            }
        }
        match &st.proposal_variances {
            None if !inherit => e.push(format!("{tag}: proposal_variances is required")),
            Some(v) if s == SamplerId::Exchange && v.len() != 1 => e.push(format!("{tag}: proposal_variances needs one entry")),
            Some(v) if v.len() != dim => e.push(format!("{tag}: proposal_variances has {} entries, model has {dim} parameters", v.len())),
            Some(v) if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) => e.push(format!("{tag}: proposal_variances must be positive")),
            _ => {}
        }
        if let Some(v) = &st.init {
            if v.len() != dim {
                e.push(format!("{tag}: init has {} values, model has {dim} parameters", v.len()));
            } else if matches!(id, ModelId::Gk | ModelId::Lv) && v.iter().any(|x| !(*x > 0.0)) {
                e.push(format!("{tag}: init values must be positive for log-scale parameters"));
            }
        }
        at_least_one(e, &format!("{tag} adapt_interval"), st.adapt_interval);
    }
    positive(e, &format!("{tag} delta"), st.delta);
    let needs_delta = matches!(s, SamplerId::Pm | SamplerId::Rs | SamplerId::Xrs);
    if needs_delta && st.delta.is_none() && !inherit {
        e.push(format!("{tag}: delta is required"));
    }
    at_least_one(e, &format!("{tag} m"), st.m);
    at_least_one(e, &format!("{tag} r"), st.r);
    at_least_one(e, &format!("{tag} r1"), st.r1);
    at_least_one(e, &format!("{tag} r2"), st.r2);
    check_strata(e, &tag, &st.strata);
    if let Some(p) = st.psi {
        if !(p > 0.0 && p <= 100.0) {
            e.push(format!("{tag}: psi must lie in (0, 100], got {p}"));
        }
    }
    at_least_one(e, &format!("{tag} period"), st.period);
    if let (Some(k), Some(n)) = (st.k_burnin, st.iterations) {
        if k >= n && k > 0 {
            e.push(format!("{tag}: k_burnin = {k} must be below the {n} iterations"));
        }
    }
    if s == SamplerId::Smc {
        if st.particles.is_some_and(|n| n < 2) {
            e.push(format!("{tag}: particles must be at least 2"));
        }
        if let Some(g) = st.gamma {
            if !(g > 0.0 && g < 1.0) {
                e.push(format!("{tag}: gamma must lie in (0, 1), got {g}"));
            }
        }
        if let Some(r) = st.stop_rate {
            if !(0.0..=1.0).contains(&r) {
                e.push(format!("{tag}: stop_rate must lie in [0, 1], got {r}"));
            }
        }
        if let (Some(m), Some(n)) = (st.ess_min, st.particles) {
            if !(m >= 0.0 && m <= n as f64) {
                e.push(format!("{tag}: ess_min must lie in [0, particles]"));
            }
        }
        at_least_one(e, &format!("{tag} max_iter"), st.max_iter);
    }
}

fn validate_sweep(e: &mut Vec<String>, sw: &SweepConfig, id: ModelId, dim: usize) {
    if !(sw.lo < sw.hi) {
        e.push(format!("sweep: lo = {} must be below hi = {}", sw.lo, sw.hi));
    }
    if sw.points < 2 {
        e.push("sweep.points must be at least 2".into());
    }
    at_least_one(e, "sweep.reps", Some(sw.reps));
    if sw.coordinate >= dim {
        e.push(format!("sweep.coordinate {} out of range for {dim} parameters", sw.coordinate));
    }
    match &sw.at {
        None if dim > 1 => e.push("sweep.at is required for models with several parameters".into()),
        Some(a) if a.len() != dim => e.push(format!("sweep.at has {} values, model has {dim} parameters", a.len())),
        _ => {}
    }
    if sw.estimators.is_empty() {
        e.push("sweep.estimators is empty".into());
    }
    let mut labels = Vec::new();
    for (i, c) in sw.estimators.iter().enumerate() {
        let tag = format!("sweep.estimators[{i}]");
        let l = c.label();
        if labels.contains(&l) {
            e.push(format!("{tag}: duplicate label {l}"));
        }
        if l.is_empty() || !l.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
            e.push(format!("{tag}: label {l:?} must be non-empty and use letters, digits, '_' or '-'"));
        }
        labels.push(l);
        if c.kind == CurveKind::Exact {
            if id != ModelId::Gaussian {
                e.push(format!("{tag}: an exact likelihood is available for the gaussian model only"));
            }
        } else if c.delta.is_none() {
            e.push(format!("{tag}: delta is required"));
        }
        positive(e, &format!("{tag} delta"), c.delta);
        let present = [("m", c.m.is_some()), ("r", c.r.is_some()), ("r1", c.r1.is_some()), ("r2", c.r2.is_some()), ("strata", c.strata.is_some())];
        let ok: &[&str] = match c.kind {
            CurveKind::Mc => &["m"],
            CurveKind::Res => &["r"],
            CurveKind::Rs | CurveKind::Xrs => &["r1", "r2", "strata"],
            CurveKind::Exact => &[],
        };
        for (k, set) in present {
            if set && !ok.contains(&k) {
                e.push(format!("{tag}: key {k} does not apply to this estimator"));
            }
        }
        at_least_one(e, &format!("{tag} m"), c.m);
        at_least_one(e, &format!("{tag} r"), c.r);
        at_least_one(e, &format!("{tag} r1"), c.r1);
        at_least_one(e, &format!("{tag} r2"), c.r2);
        check_strata(e, &tag, &c.strata);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<ExperimentConfig> {
        parse_config_str(text, Path::new("."))
    }

    fn errors(text: &str) -> Vec<String> {
        match parse(text) {
            Err(CliError::Config(v)) => v,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_gaussian_gets_reference_defaults() {
        let c = parse("[model]\nid = \"gaussian\"\n[[stages]]\nsampler = \"rs\"\n").unwrap();
        let st = &c.stages[0];
        assert_eq!((st.r1, st.r2), (Some(500), Some(500)));
        assert_eq!(st.delta, Some(3e-4));
        assert_eq!(st.strata.as_deref(), Some(&[0.5, 1.0][..]));
        assert_eq!(c.model.n_obs, Some(1000));
        assert_eq!((c.model.prior_mean, c.model.prior_sd), (Some(0.1), Some(0.2)));
        assert_eq!(c.data.observed_mean, Some(OBSERVED_MEAN));
        assert_eq!((st.iterations, st.burn, st.adapt), (Some(10_000), Some(1000), Some(false)));
        assert_eq!(st.proposal_variances, Some(vec![0.01]));
    }

    #[test]
    fn empty_breakpoints_is_a_single_stratum() {
        let c = parse("[model]\nid = \"gaussian\"\n[[stages]]\nsampler = \"rs\"\nstrata = []\n").unwrap();
        assert_eq!(c.stages[0].strata, Some(vec![]));
    }

    #[test]
    fn block_length_must_divide_series() {
        let text = "[model]\nid = \"lv\"\nblock_len = 7\n[data]\ntruth = [1.0, 0.005, 0.6]\n[[stages]]\nsampler = \"pm\"\ndelta = 0.2\nproposal_variances = [0.1, 0.1, 0.1]\n";
        let e = errors(text);
        assert!(e.iter().any(|m| m.contains("block_len = 7") && m.contains("n_obs = 32")), "{e:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = errors("[model]\nid = \"gaussian\"\ncolour = 3\n[[stages]]\nsampler = \"rs\"\n");
        assert!(e[0].contains("colour"), "{e:?}");
        let e = errors("bogus = 1\n[model]\nid = \"gaussian\"\n");
        assert!(e[0].contains("bogus"), "{e:?}");
    }

    #[test]
    fn missing_model_is_an_error() {
        let e = errors("[[stages]]\nsampler = \"rs\"\n");
        assert!(e[0].contains("model.id"));
        let e = errors("[model]\nid = \"gaussian\"\n[[stages]]\n");
        assert!(e[0].contains("sampler"), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "[model]\nid = \"gk\"\nn_obs = 4\n[[stages]]\nsampler = \"rs\"\nr1 = 0\nm = 3\n";
        let e = errors(text);
        for needle in ["n_obs must be at least 8", "data: a file or a truth", "r1 must be at least 1", "key m does not apply", "delta is required", "proposal_variances is required"] {
            assert!(e.iter().any(|m| m.contains(needle)), "missing {needle:?} in {e:?}");
        }
    }

    #[test]
    fn sampler_model_pairing() {
        let e = errors("[model]\nid = \"gaussian\"\n[[stages]]\nsampler = \"exchange\"\n");
        assert!(e.iter().any(|m| m.contains("needs the ising model")));
        let e = errors("[model]\nid = \"ising\"\n[data]\ntruth = [0.3]\n[[stages]]\nsampler = \"exact\"\nproposal_variances = [0.01]\n");
        assert!(e.iter().any(|m| m.contains("gaussian model only")));
    }

    #[test]
    fn inheritance_defaults_follow_stage_order() {
        let text = "[model]\nid = \"gk\"\n[data]\ntruth = [3.0, 1.0, 2.0, 0.5]\n[[stages]]\nsampler = \"r\"\nproposal_variances = [0.01, 0.01, 0.01, 0.0001]\n[[stages]]\nsampler = \"xrs\"\n";
        let c = parse(text).unwrap();
        assert_eq!(c.stages[0].inherit, Some(false));
        assert_eq!(c.stages[1].inherit, Some(true));
        assert_eq!(c.stages[1].delta, None);
        let bad = text.replace("[[stages]]\nsampler = \"r\"", "[[stages]]\nsampler = \"r\"\ninherit = true");
        assert!(errors(&bad).iter().any(|m| m.contains("needs a previous stage")));
    }

    #[test]
    fn output_dir_must_stay_inside_root() {
        let e = errors("output_dir = \"../escape\"\n[model]\nid = \"gaussian\"\n[[stages]]\nsampler = \"rs\"\n");
        assert!(e.iter().any(|m| m.contains("relative path")));
    }

    #[test]
    fn echo_round_trips() {
        let c = parse("name = \"t\"\n[model]\nid = \"gaussian\"\n[[stages]]\nsampler = \"pm\"\n[sweep]\nlo = -0.1\nhi = 0.1\n").unwrap();
        let again = parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
