//! Runs an experiment: model and data, scaling, stages, artifacts.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use stratabc_core::diagnostics::{chain_diagnostics, likelihood_curve, posterior_summary, CurveEstimator, CurvePoint};
use stratabc_core::models::gaussian::gaussian_exact_summary_loglik;
use stratabc_core::models::ising::ising_exchange_sampler;
use stratabc_core::models::pilot::pilot_prior_predictive;
use stratabc_core::samplers::abc_mcmc::{handoff, run_exact_mh, run_pm_abc_mcmc, run_r_abc_mcmc, run_rs_abc_mcmc};
use stratabc_core::smc::{run_abc_smc_with, SmcRun, SmcStop};
use stratabc_core::{
    Chain, Dataset, KernelConfig, KernelKind, McmcSettings, Model, RabcSettings, RandomStream, RsabcSettings, ScalingMatrix, SmcSettings,
    StrataSpec,
};

use crate::config::{CurveKind, ExperimentConfig, KernelId, SamplerId, ScalingMethod, StageConfig};
use crate::data::{build_model, observed_data, BuiltModel};
use crate::error::{CliError, CliResult};
use crate::output::{chain_tsv, generations_tsv, param_columns, population_header, population_rows, threshold_tsv, write_file, ChainTable};
use crate::plot::{curve_tsv, emit_chain_densities, weighted_density_grid, DEFAULT_BINS};

const STAGE_STREAM: u64 = 0x57a6e;
const SWEEP_STREAM: u64 = 0x5eed;
const BATCH_STREAM: u64 = 0xba7c;

/// Files written for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageArtifacts {
    pub sampler: SamplerId,
    /// MCMC trace; absent for SMC.
    pub chain: Option<PathBuf>,
    /// Threshold events, or the per-generation trace for SMC.
    pub threshold: PathBuf,
    /// SMC populations after every generation.
    pub population: Option<PathBuf>,
    /// The SMC output population.
    pub final_population: Option<PathBuf>,
    pub burn: usize,
}

/// Everything a run leaves in its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config_echo: PathBuf,
    pub manifest: PathBuf,
    pub diagnostics: PathBuf,
    pub observed: PathBuf,
    pub stages: Vec<StageArtifacts>,
    pub curves: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

/// What a stage passes to the next.
#[derive(Debug, Clone)]
struct Carry {
    theta: Vec<f64>,
    delta: f64,
    sigma: ScalingMatrix,
    cov: Vec<f64>,
}

enum StageOutput {
    Chain(Chain),
    Smc(SmcRun, ScalingMatrix),
}

fn kind(k: Option<KernelId>) -> KernelKind {
    match k.unwrap_or_default() {
        KernelId::Gaussian => KernelKind::Gaussian,
        KernelId::Indicator => KernelKind::Indicator,
    }
}

/// `root/output_dir`.
pub fn output_path(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(cfg.output_dir())
}

/// The scaling matrix every stage starts from.
pub fn experiment_sigma(cfg: &ExperimentConfig, model: &dyn Model) -> CliResult<ScalingMatrix> {
    let sc = &cfg.scaling;
    match sc.method {
        ScalingMethod::Identity => Ok(ScalingMatrix::identity(model.n_summaries())),
        ScalingMethod::Fixed => ScalingMatrix::from_diag(sc.diag.clone().expect("validated")).map_err(|e| CliError::core("scaling", e)),
        ScalingMethod::Pilot => pilot_prior_predictive(model, sc.pilot_draws.expect("resolved"), sc.pilot_seed.expect("resolved"))
            .map_err(|e| CliError::core("pilot run", e)),
    }
}

fn mcmc_settings(st: &StageConfig, model: &dyn Model, carry: Option<&Carry>) -> McmcSettings {
    let prior = model.prior();
    let n = st.iterations.expect("resolved");
    let mut s = match (&st.proposal_variances, carry) {
        (Some(v), _) => McmcSettings::new(n, v),
        (None, Some(c)) => {
            let mut s = McmcSettings::new(n, &vec![1.0; prior.dim()]);
            s.proposal_cov = c.cov.clone();
            s
        }
        (None, None) => unreachable!("validated: proposal variances or inheritance"),
    };
    s.adapt = st.adapt.unwrap_or(false);
    if let Some(k) = st.adapt_interval {
        s.adapt_interval = k;
    }
    if let Some(init) = &st.init {
        s.init = Some(prior.to_sampling(init));
    } else if let Some(c) = carry {
        s.init = Some(c.theta.clone());
    }
    s
}

fn run_stage(
    cfg: &ExperimentConfig,
    i: usize,
    model: &BuiltModel,
    s_obs: &[f64],
    sigma0: &ScalingMatrix,
    carry: Option<&Carry>,
    snapshots: &mut String,
) -> CliResult<StageOutput> {
    let st = &cfg.stages[i];
    let m = model.as_model();
    let mut rng = RandomStream::for_task(cfg.seed, &[STAGE_STREAM, i as u64]);
    let ctx = |e| CliError::core(format!("stage {} ({})", i + 1, st.sampler.as_str()), e);
    let carry = if st.inherit == Some(true) { carry } else { None };
    let sigma = carry.map_or_else(|| sigma0.clone(), |c| c.sigma.clone());
    let delta = st.delta.or(carry.map(|c| c.delta));
    let kernel = |d: f64| KernelConfig::new(kind(st.kernel), d, sigma.clone()).map_err(ctx);
    let out = match st.sampler {
        SamplerId::Pm => {
            let settings = mcmc_settings(st, m, carry);
            StageOutput::Chain(run_pm_abc_mcmc(m, s_obs, st.m.expect("resolved"), &kernel(delta.expect("validated"))?, &settings, &mut rng).map_err(ctx)?)
        }
        SamplerId::R => {
            let settings = mcmc_settings(st, m, carry);
            let mut r = RabcSettings::new(st.r.expect("resolved"), st.psi.expect("resolved"), st.k_burnin.expect("resolved"));
            r.kernel = kind(st.kernel);
            r.period = st.period;
            r.sigma0 = Some(sigma.clone());
            r.delta0 = delta;
            r.tune_delta = st.tune_delta.unwrap_or(true);
            StageOutput::Chain(run_r_abc_mcmc(m, s_obs, &r, &settings, &mut rng).map_err(ctx)?)
        }
        SamplerId::Rs | SamplerId::Xrs => {
            let settings = mcmc_settings(st, m, carry);
            let d = delta.expect("validated");
            let rs = RsabcSettings {
                r1: st.r1.expect("resolved"),
                r2: st.r2.expect("resolved"),
                strata: StrataSpec::scaled(st.strata.as_deref().expect("resolved"), d).map_err(ctx)?,
                kernel: kernel(d)?,
                averaged: st.sampler == SamplerId::Xrs,
            };
            StageOutput::Chain(run_rs_abc_mcmc(m, s_obs, &rs, &settings, &mut rng).map_err(ctx)?)
        }
        SamplerId::Exact => {
            let BuiltModel::Gaussian(g) = model else { unreachable!("validated") };
            let settings = mcmc_settings(st, m, carry);
            let (n, s) = (g.n_obs(), s_obs[0]);
            StageOutput::Chain(run_exact_mh(m, |t: &[f64]| gaussian_exact_summary_loglik(t[0], s, n), &settings, &mut rng).map_err(ctx)?)
        }
        SamplerId::Exchange => {
            let BuiltModel::Ising(im) = model else { unreachable!("validated") };
            let sd = match (&st.proposal_variances, carry) {
                (Some(v), _) => v[0].sqrt(),
                (None, Some(c)) => c.cov[0].sqrt(),
                (None, None) => unreachable!("validated"),
            };
            let init = match (&st.init, carry) {
                (Some(v), _) => v[0],
                (None, Some(c)) => c.theta[0],
                (None, None) => m.prior().sample(&mut rng)[0],
            };
            StageOutput::Chain(ising_exchange_sampler(im, s_obs[0], init, sd, st.iterations.expect("resolved"), &mut rng).map_err(ctx)?)
        }
        SamplerId::Smc => {
            let n = st.particles.expect("resolved");
            let mut s = SmcSettings::new(n, st.gamma.expect("resolved"), st.stop_rate.expect("resolved"), sigma.clone());
            s.ess_min = st.ess_min.expect("resolved");
            s.max_iter = st.max_iter.expect("resolved");
            s.kernel = kind(st.kernel);
            let run = run_abc_smc_with(m, s_obs, &s, &mut rng, |p| population_rows(p, snapshots)).map_err(ctx)?;
            StageOutput::Smc(run, sigma)
        }
    };
    Ok(out)
}

fn carry_from(out: &StageOutput) -> CliResult<Carry> {
    match out {
        StageOutput::Chain(c) => {
            let h = handoff(c).map_err(|e| CliError::core("handoff", e))?;
            Ok(Carry { theta: h.theta, delta: h.delta, sigma: h.sigma, cov: h.proposal_cov })
        }
        StageOutput::Smc(run, sigma) => {
            let pop = &run.population;
            let p = pop.particles[0].len();
            let best = (0..pop.len()).max_by(|&a, &b| pop.weights[a].total_cmp(&pop.weights[b]).then(b.cmp(&a))).expect("non-empty population");
            let mut cov = vec![0.0; p * p];
            for j in 0..p {
                cov[j * p + j] = (2.0 * pop.weighted_variance(j)).max(f64::MIN_POSITIVE);
            }
            Ok(Carry { theta: pop.particles[best].clone(), delta: pop.delta, sigma: sigma.clone(), cov })
        }
    }
}

fn posterior_json(names: &[String], columns: impl Fn(usize) -> Vec<f64>) -> CliResult<Value> {
    let mut post = Map::new();
    for (j, name) in names.iter().enumerate() {
        let s = posterior_summary(&columns(j)).map_err(|e| CliError::core("posterior summary", e))?;
        post.insert(name.clone(), json!({ "mean": s.mean, "lower": s.lower, "upper": s.upper }));
    }
    Ok(Value::Object(post))
}

fn chain_json(i: usize, st: &StageConfig, chain: &Chain) -> CliResult<Value> {
    let burn = st.burn.expect("resolved");
    let mut v = json!({
        "stage": i + 1,
        "sampler": st.sampler.as_str(),
        "iterations": chain.len(),
        "burn": burn,
        "acceptance_rate": chain.acceptance_rate(),
        "final_delta": chain.final_delta,
        "final_sigma": chain.final_sigma.as_ref().map(|s| s.diag().to_vec()),
        "threshold_events": chain.threshold_trace.len(),
        "n_simulations": chain.n_simulations,
        "wall_secs": chain.elapsed_secs,
        "posterior": posterior_json(&chain.names, |j| chain.natural_coordinate(j, burn))?,
    });
    match chain_diagnostics(chain, burn) {
        Ok(d) => {
            let named = |xs: &[f64]| -> Value { chain.names.iter().cloned().zip(xs.iter().map(|&x| json!(x))).collect::<Map<_, _>>().into() };
            v["iat"] = named(&d.iat);
            v["ess"] = named(&d.ess);
            v["worst_iat"] = json!(d.worst_iat);
            v["worst_ess"] = json!(d.worst_ess);
            v["ess_per_minute"] = json!(d.ess_per_minute);
            v["retained_acceptance_rate"] = json!(d.acceptance_rate);
        }
        Err(e) => v["diagnostics_error"] = json!(e.to_string()),
    }
    Ok(v)
}

fn smc_json(i: usize, names: &[String], run: &SmcRun, model: &dyn Model) -> CliResult<Value> {
    let pop = &run.population;
    let prior = model.prior();
    let natural: Vec<Vec<f64>> = pop.particles.iter().map(|p| prior.to_natural(p)).collect();
    let mut post = Map::new();
    for (j, name) in names.iter().enumerate() {
        let vals: Vec<f64> = natural.iter().map(|p| p[j]).collect();
        let mean: f64 = vals.iter().zip(&pop.weights).map(|(v, w)| v * w).sum();
        post.insert(name.clone(), json!({ "mean": mean, "lower": weighted_quantile(&vals, &pop.weights, 0.025), "upper": weighted_quantile(&vals, &pop.weights, 0.975) }));
    }
    let stop = match run.stop {
        SmcStop::LowAcceptance => "low_acceptance",
        SmcStop::NoProgress => "no_progress",
        SmcStop::MaxIterations => "max_iterations",
    };
    Ok(json!({
        "stage": i + 1,
        "sampler": "smc",
        "generations": run.trace.len(),
        "output_generation": pop.iteration,
        "final_delta": pop.delta,
        "ess": pop.ess().map_err(|e| CliError::core("smc ess", e))?,
        "stop": stop,
        "n_simulations": run.n_simulations,
        "wall_secs": run.elapsed_secs,
        "posterior": Value::Object(post),
    }))
}

/// Smallest value whose cumulative weight reaches `q`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &k in &idx {
        acc += weights[k];
        if acc >= q * total {
            return values[k];
        }
    }
    values[*idx.last().expect("non-empty")]
}

/// Natural-scale grid of the swept coordinate and the matching sampling-scale
/// parameter vectors.
pub fn sweep_grid(cfg: &ExperimentConfig, model: &dyn Model) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sw = cfg.sweep.as_ref().expect("sweep configured");
    let base = sw.at.clone().unwrap_or_else(|| vec![0.0; model.prior().dim()]);
    let grid: Vec<f64> = (0..sw.points).map(|k| sw.lo + (sw.hi - sw.lo) * k as f64 / (sw.points - 1) as f64).collect();
    let thetas = grid
        .iter()
        .map(|&v| {
            let mut t = base.clone();
            t[sw.coordinate] = v;
            model.prior().to_sampling(&t)
        })
        .collect();
    (grid, thetas)
}

fn run_sweep(cfg: &ExperimentConfig, model: &BuiltModel, s_obs: &[f64], sigma: &ScalingMatrix, dir: &Path) -> CliResult<(Vec<PathBuf>, Value)> {
    let sw = cfg.sweep.as_ref().expect("sweep configured");
    let m = model.as_model();
    let (grid, thetas) = sweep_grid(cfg, m);
    let mut files = Vec::new();
    let mut summary = Map::new();
    for (k, c) in sw.estimators.iter().enumerate() {
        let points: Vec<CurvePoint> = if c.kind == CurveKind::Exact {
            let BuiltModel::Gaussian(g) = model else { unreachable!("validated") };
            thetas
                .iter()
                .map(|t| {
                    let v = gaussian_exact_summary_loglik(t[0], s_obs[0], g.n_obs());
                    CurvePoint { theta: t.clone(), mean: v, lower: v, upper: v, median_attempts: 1.0 }
                })
                .collect()
        } else {
            let delta = c.delta.expect("validated");
            let kernel = KernelConfig::new(kind(c.kernel), delta, sigma.clone()).map_err(|e| CliError::core("sweep kernel", e))?;
            let est = match c.kind {
                CurveKind::Mc => CurveEstimator::Mc { m: c.m.expect("resolved") },
                CurveKind::Res => CurveEstimator::Res { r: c.r.expect("resolved") },
                _ => CurveEstimator::Strat {
                    r1: c.r1.expect("resolved"),
                    r2: c.r2.expect("resolved"),
                    strata: StrataSpec::scaled(c.strata.as_deref().expect("resolved"), delta).map_err(|e| CliError::core("sweep strata", e))?,
                    averaged: c.kind == CurveKind::Xrs,
                },
            };
            let seed = RandomStream::derive_seed(cfg.seed, &[SWEEP_STREAM, k as u64]);
            likelihood_curve(m, s_obs, &thetas, &est, &kernel, sw.reps, seed).map_err(|e| CliError::core(format!("sweep {}", c.label()), e))?
        };
        let path = dir.join(format!("curve_{}.tsv", c.label()));
        write_file(&path, &curve_tsv(&points, &grid))?;
        files.push(path);
        let best = points.iter().enumerate().max_by(|a, b| a.1.mean.total_cmp(&b.1.mean)).map(|(i, _)| grid[i]);
        summary.insert(c.label(), json!({ "argmax": best }));
    }
    Ok((files, Value::Object(summary)))
}

fn relative(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).display().to_string()
}

/// Runs every stage and the sweep of `cfg`, writing artifacts into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> CliResult<RunArtifacts> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let model = build_model(cfg)?;
    let m = model.as_model();
    let x: Dataset = observed_data(cfg, &model)?;
    let s_obs = m.summarize(&x).map_err(|e| CliError::core("observed summaries", e))?;
    if s_obs.iter().any(|v| !v.is_finite()) {
        return Err(CliError::config(format!("observed summaries are not finite: {s_obs:?}")));
    }
    let observed = dir.join("observed.txt");
    write_file(&observed, &x.to_text())?;
    let sigma0 = experiment_sigma(cfg, m)?;
    log::info!("{}: observed summaries {s_obs:?}, Σ diag {:?}", cfg.name, sigma0.diag());

    let columns = param_columns(m.prior().names(), m.prior().log_scale());
    let mut stages = Vec::new();
    let mut stage_json = Vec::new();
    let mut carry: Option<Carry> = None;
    for (i, st) in cfg.stages.iter().enumerate() {
        let stem = format!("stage{}_{}", i + 1, st.sampler.as_str());
        log::info!("{}: running {stem}", cfg.name);
        let mut snapshots = String::new();
        let out = run_stage(cfg, i, &model, &s_obs, &sigma0, carry.as_ref(), &mut snapshots)?;
        let threshold = dir.join(format!("{stem}.threshold.tsv"));
        match &out {
            StageOutput::Chain(chain) => {
                let path = dir.join(format!("{stem}.chain.tsv"));
                write_file(&path, &chain_tsv(chain))?;
                write_file(&threshold, &threshold_tsv(chain))?;
                stage_json.push(chain_json(i, st, chain)?);
                let burn = st.burn.expect("resolved");
                stages.push(StageArtifacts { sampler: st.sampler, chain: Some(path), threshold, population: None, final_population: None, burn });
            }
            StageOutput::Smc(run, _) => {
                write_file(&threshold, &generations_tsv(&run.trace))?;
                let path = dir.join(format!("{stem}.population.tsv"));
                let mut text = population_header(&columns);
                text.push_str(&snapshots);
                let mut last = run.population.clone();
                last.iteration = 0;
                let mut final_rows = String::new();
                population_rows(&last, &mut final_rows);
                write_file(&path, &text)?;
                let final_path = dir.join(format!("{stem}.final.tsv"));
                write_file(&final_path, &(population_header(&columns) + &final_rows))?;
                stage_json.push(smc_json(i, m.prior().names(), run, m)?);
                stages.push(StageArtifacts {
                    sampler: st.sampler,
                    chain: None,
                    threshold,
                    population: Some(path),
                    final_population: Some(final_path),
                    burn: 0,
                });
            }
        }
        carry = match cfg.stages.get(i + 1) {
            Some(next) if next.inherit == Some(true) => Some(carry_from(&out)?),
            _ => None,
        };
    }

    let (curves, sweep_json) = if cfg.sweep.is_some() {
        let (f, v) = run_sweep(cfg, &model, &s_obs, &sigma0, dir)?;
        (f, v)
    } else {
        (Vec::new(), Value::Null)
    };

    let diagnostics = dir.join("diagnostics.json");
    let diag = json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "model": m.name(),
        "observed_summaries": s_obs,
        "sigma": sigma0.diag(),
        "stages": stage_json,
        "sweep": sweep_json,
    });
    write_file(&diagnostics, &(serde_json::to_string_pretty(&diag).expect("json") + "\n"))?;

    let mut echo_cfg = cfg.clone();
    echo_cfg.data = crate::config::DataConfig { file: Some(PathBuf::from("observed.txt")), ..Default::default() };
    let config_echo = dir.join("config.toml");
    write_file(&config_echo, &echo_cfg.to_toml())?;

    let manifest = dir.join("manifest.json");
    let mut art = RunArtifacts { dir: dir.to_path_buf(), config_echo, manifest, diagnostics, observed, stages, curves, plots: Vec::new() };
    art.plots = emit_plot_data(&art)?;

    let mut files: Vec<String> = vec![relative(dir, &art.observed), relative(dir, &art.config_echo), relative(dir, &art.diagnostics)];
    for s in &art.stages {
        let own = s.chain.iter().chain(std::iter::once(&s.threshold)).chain(s.population.iter()).chain(s.final_population.iter());
        files.extend(own.map(|p| relative(dir, p)));
    }
    files.extend(art.curves.iter().chain(&art.plots).map(|p| relative(dir, p)));
    let man = json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "program": "stratabc",
        "version": env!("CARGO_PKG_VERSION"),
        "config": "config.toml",
        "files": files,
    });
    write_file(&art.manifest, &(serde_json::to_string_pretty(&man).expect("json") + "\n"))?;
    Ok(art)
}

/// Parameter columns and weights of a population file.
pub fn read_population(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| CliError::config(format!("{} is empty", path.display())))?.split('\t').collect();
    if header.len() < 5 || header[0] != "generation" || !header.ends_with(&["weight", "distance"]) {
        return Err(CliError::config(format!("{}: not a population file", path.display())));
    }
    let p = header.len() - 4;
    let mut theta = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split('\t')
            .map(|s| s.parse::<f64>().map_err(|_| CliError::config(format!("{} row {}: not a number {s:?}", path.display(), i + 1))))
            .collect::<CliResult<_>>()?;
        if f.len() != p + 4 {
            return Err(CliError::config(format!("{} row {}: expected {} fields", path.display(), i + 1, p + 4)));
        }
        theta.push(f[2..2 + p].to_vec());
        weights.push(f[2 + p]);
    }
    Ok((header[2..2 + p].iter().map(|s| s.to_string()).collect(), theta, weights))
}

/// Density grids of every chain after burn-in and of every SMC output
/// population, written under `plots/`. Likelihood curves are written by the
/// sweep itself.
pub fn emit_plot_data(art: &RunArtifacts) -> CliResult<Vec<PathBuf>> {
    let dir = art.dir.join("plots");
    let mut out = Vec::new();
    for (i, s) in art.stages.iter().enumerate() {
        let prefix = format!("stage{}_{}_", i + 1, s.sampler.as_str());
        if let Some(chain) = &s.chain {
            out.extend(emit_chain_densities(&ChainTable::read(chain)?, s.burn, &dir, &prefix, DEFAULT_BINS)?);
        }
        if let Some(pop) = &s.final_population {
            let (names, theta, w) = read_population(pop)?;
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for (j, name) in names.iter().enumerate() {
                let col: Vec<f64> = theta.iter().map(|t| t[j]).collect();
                let path = dir.join(format!("{prefix}density_{name}.tsv"));
                write_file(&path, &weighted_density_grid(&col, &w, DEFAULT_BINS)?.to_tsv())?;
                out.push(path);
            }
        }
    }
    Ok(out)
}

/// Seed of replicate `k` of a batch.
pub fn replicate_seed(seed: u64, k: usize) -> u64 {
    RandomStream::derive_seed(seed, &[BATCH_STREAM, k as u64])
}

/// `k` replicates with derived seeds, run concurrently, each in its own
/// `rep_NNN` subdirectory. All replicates run even if some fail; the first
/// failure is returned.
pub fn run_batch(cfg: &ExperimentConfig, dir: &Path, k: usize) -> CliResult<Vec<RunArtifacts>> {
    if k == 0 {
        return Err(CliError::config("--replicates must be at least 1"));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let results: Vec<CliResult<RunArtifacts>> = (0..k)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = replicate_seed(cfg.seed, r);
            run_experiment(&c, &dir.join(format!("rep_{:03}", r + 1)))
        })
        .collect();
    let mut summary = String::from("replicate\tseed\tstatus\n");
    for (r, res) in results.iter().enumerate() {
        let status = match res {
            Ok(_) => "ok".to_string(),
            Err(e) => e.to_string().replace(['\n', '\t'], " "),
        };
        summary.push_str(&format!("{}\t{}\t{status}\n", r + 1, replicate_seed(cfg.seed, r)));
    }
    write_file(&dir.join("batch.tsv"), &summary)?;
    results.into_iter().collect()
}

/// Diagnostics of a chain file, as JSON.
pub fn diagnose_chain_file(path: &Path, burn: Option<usize>) -> CliResult<Value> {
    let t = ChainTable::read(path)?;
    if t.is_empty() {
        return Err(CliError::config(format!("{} holds no iterations", path.display())));
    }
    let burn = burn.unwrap_or(t.len() / 5);
    if burn >= t.len() {
        return Err(CliError::config(format!("burn-in {burn} leaves no draws out of {}", t.len())));
    }
    let n = t.len() - burn;
    let mut per = Map::new();
    for (j, name) in t.columns.iter().enumerate() {
        let col = t.column(j, burn);
        let iat = match stratabc_core::iat(&col) {
            Ok(v) => json!(v),
            Err(stratabc_core::AbcError::Degenerate(_)) => json!(f64::INFINITY),
            Err(e) => json!(e.to_string()),
        };
        let ess = iat.as_f64().map(|v| stratabc_core::ess_from_iat(n, v));
        let s = posterior_summary(&col).map_err(|e| CliError::core("posterior summary", e))?;
        per.insert(name.clone(), json!({ "iat": iat, "ess": ess, "mean": s.mean, "lower": s.lower, "upper": s.upper }));
    }
    let acc = t.accepted[burn..].iter().filter(|&&a| a).count() as f64 / n as f64;
    Ok(json!({ "file": path.display().to_string(), "iterations": t.len(), "burn": burn, "acceptance_rate": acc, "parameters": Value::Object(per) }))
}
