use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use stratabc_core::kernels::{distances_to, KernelConfig, KernelKind, ScalingMatrix, Summaries};
use stratabc_core::models::gaussian::{gaussian_observed, OBSERVED_MEAN};
use stratabc_core::models::gk::gk_simulate;
use stratabc_core::stratification::{log_averaged_strat_likelihood, log_res_likelihood, log_strat_likelihood, StrataSpec};
use stratabc_core::{make_index_matrix, GaussianModel, GkModel, IsingModel, LvModel, Model, RandomStream};

fn estimators(c: &mut Criterion) {
    let mut rng = RandomStream::new(1, 0);
    let kernel = KernelConfig::new(KernelKind::Gaussian, 0.5, ScalingMatrix::identity(1)).unwrap();
    let spec = StrataSpec::scaled(&[0.5, 1.0], 0.5).unwrap();
    let mut g = c.benchmark_group("estimators");
    for r in [100, 500, 2000] {
        let train: Vec<f64> = (0..r).map(|_| rng.standard_normal().abs()).collect();
        let test: Vec<f64> = (0..r).map(|_| rng.standard_normal().abs()).collect();
        g.bench_with_input(BenchmarkId::new("res", r), &r, |b, _| b.iter(|| log_res_likelihood(black_box(&test), &kernel)));
        g.bench_with_input(BenchmarkId::new("strat", r), &r, |b, _| b.iter(|| log_strat_likelihood(black_box(&train), &test, &spec, &kernel)));
        g.bench_with_input(BenchmarkId::new("averaged", r), &r, |b, _| {
            b.iter(|| log_averaged_strat_likelihood(black_box(&train), &test, &spec, &kernel))
        });
    }
    g.finish();
}

/// One simulation plus summaries of 500 resamples, per model.
fn resampled_summaries(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_and_resample");
    g.sample_size(10);
    let mut run = |name: &str, model: &dyn Model, theta: Vec<f64>| {
        let mut rng = RandomStream::new(2, 0);
        let u = make_index_matrix(model.block_scheme(), model.data_shape(), 500, &mut rng).unwrap();
        let mut set = Summaries::new(model.n_summaries());
        g.bench_function(name, |b| {
            b.iter(|| {
                set.clear();
                let x = model.simulate(&theta, &mut rng).unwrap();
                model.summarize_resamples(&x, &u, &mut set).unwrap();
                black_box(set.len())
            })
        });
    };
    let gauss = GaussianModel::reference();
    run("gaussian", &gauss, vec![0.0]);
    let gk = GkModel::reference();
    run("gk", &gk, gk.prior().to_sampling(&[3.0, 1.0, 2.0, 0.5]));
    let ising = IsingModel::reference();
    run("ising", &ising, vec![0.3]);
    let lv = LvModel::reference();
    run("lv", &lv, lv.prior().to_sampling(&[1.0, 0.005, 0.6]));
    g.finish();
}

fn distances(c: &mut Criterion) {
    let mut rng = RandomStream::new(3, 0);
    let model = GkModel::reference();
    let x = gk_simulate(&[3.0, 1.0, 2.0, 0.5], 2000, &mut rng).unwrap();
    let s_obs = model.summarize(&x).unwrap();
    let u = make_index_matrix(model.block_scheme(), model.data_shape(), 500, &mut rng).unwrap();
    let mut set = Summaries::new(4);
    model.summarize_resamples(&x, &u, &mut set).unwrap();
    let sigma = ScalingMatrix::from_diag(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    c.bench_function("distances_gk_500", |b| b.iter(|| distances_to(black_box(&set), &s_obs, &sigma).unwrap()));
    let gx = gaussian_observed(1000, OBSERVED_MEAN, &mut rng);
    c.bench_function("gaussian_summary", |b| b.iter(|| GaussianModel::reference().summarize(black_box(&gx)).unwrap()));
}

criterion_group!(benches, estimators, resampled_summaries, distances);
criterion_main!(benches);
