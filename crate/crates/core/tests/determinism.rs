use covest::estimator::{estimate, estimate_streaming};
use covest::experiments::{run, ExperimentConfig, ExperimentKind, ResultRow};
use covest::linalg::{DataMatrix, SymMatrix};
use covest::sampling::{compress, sample_gaussian, GaussianSpec, RngStream};
use covest::simnet::{run_network, sweep_tradeoff, Protocol};
use covest::theory::{mc_redraw_mean, Stage};

fn data(d: usize, n: usize, seed: u64) -> DataMatrix {
    sample_gaussian(&GaussianSpec::new(SymMatrix::identity(d)).unwrap(), n, &mut RngStream::new(seed, 0)).unwrap()
}

fn with_threads<T: Send>(k: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap().install(f)
}

fn bits(m: &SymMatrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let x = data(9, 3000, 1);
    let one = with_threads(1, || estimate_streaming(&x, 3, 5).unwrap());
    let four = with_threads(4, || estimate_streaming(&x, 3, 5).unwrap());
    let two_step = with_threads(3, || estimate(&compress(&x, 3, 5).unwrap()).unwrap());
    assert_eq!(bits(&one.matrix), bits(&four.matrix));
    assert_eq!(bits(&one.matrix), bits(&two_step.matrix));
}

#[test]
fn network_runs_do_not_depend_on_thread_count() {
    let x = data(7, 1500, 2);
    for p in Protocol::ALL {
        let a = with_threads(1, || run_network(&x, 2, p, 9).unwrap());
        let b = with_threads(5, || run_network(&x, 2, p, 9).unwrap());
        assert_eq!(bits(&a.0.matrix), bits(&b.0.matrix));
        assert_eq!(a.1, b.1);
    }
}

#[test]
fn monte_carlo_means_do_not_depend_on_thread_count() {
    let x = data(5, 4, 3);
    let a = with_threads(1, || mc_redraw_mean(&x, 2, 3000, 4, Stage::Debiased).unwrap());
    let b = with_threads(4, || mc_redraw_mean(&x, 2, 3000, 4, Stage::Debiased).unwrap());
    assert_eq!(bits(&a.mean), bits(&b.mean));
}

#[test]
fn experiment_rows_reproduce_bitwise() {
    let mut c = ExperimentConfig::defaults(ExperimentKind::CompareHmt);
    c.d_grid = vec![10];
    c.m_grid = vec![3];
    c.n_grid = vec![50, 500];
    c.trials = 2;
    let strip = |rows: Vec<ResultRow>| rows.into_iter().map(|r| ResultRow { wall_ms: 0.0, ..r }).collect::<Vec<_>>();
    let a = strip(with_threads(1, || run(&c).unwrap().rows));
    let b = strip(with_threads(4, || run(&c).unwrap().rows));
    assert_eq!(a, b);
    c.master_seed += 1;
    assert_ne!(a, strip(run(&c).unwrap().rows));
}

#[test]
fn sweep_full_rank_matches_sample_covariance_error() {
    let spec = GaussianSpec::new(SymMatrix::identity(6)).unwrap();
    let full = sweep_tradeoff(&spec, 400, &[6], Protocol::SynchronizedSeed, 4, 3).unwrap();
    let naive = sweep_tradeoff(&spec, 400, &[6], Protocol::NaiveFull, 4, 3).unwrap();
    assert!((full[0].mean_err_spec - naive[0].mean_err_spec).abs() < 1e-9);
}

#[test]
fn sweep_error_decreases_with_measurements() {
    let spec = GaussianSpec::new(SymMatrix::identity(8)).unwrap();
    let rows = sweep_tradeoff(&spec, 1000, &[1, 2, 4, 8], Protocol::Backprojected, 8, 11).unwrap();
    for w in rows.windows(2) {
        let slack = 3.0 * w[0].se_err_spec.hypot(w[1].se_err_spec);
        assert!(w[1].mean_err_spec <= w[0].mean_err_spec + slack);
    }
}
