use sepfluct::analysis::{
    covariance_oracle_finite_n, simulate_ensemble, BruteForceModel, BruteForceObservable, EnsembleConfig, Quantity,
};
use sepfluct::analysis::stats::mean_estimate;
use sepfluct::grid::{read_grid, write_grid};
use sepfluct::{build_grid, Bandwidth, FieldObservable, ManifoldModel};

fn config(replicas: usize, threads: Option<usize>) -> EnsembleConfig {
    EnsembleConfig {
        rho: 0.5,
        horizon: 0.5,
        sample_times: EnsembleConfig::uniform_times(0.5, 5),
        replicas,
        seed: 17,
        threads,
        track_gamma: true,
    }
}

#[test]
fn identical_across_worker_counts() {
    let m = ManifoldModel::flat_torus(2).unwrap();
    let g = build_grid(&m, 150, Bandwidth::Auto, 4).unwrap();
    let obs = vec![FieldObservable::new(&g, &m.eigenfunction(&[1, 1]).unwrap(), 0.5).unwrap()];
    let a = simulate_ensemble(&g, &obs, &config(40, Some(1))).unwrap();
    let b = simulate_ensemble(&g, &obs, &config(40, Some(4))).unwrap();
    let c = simulate_ensemble(&g, &obs, &config(40, None)).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.runs, c.runs);
}

#[test]
fn single_replica_flags_undefined_se() {
    let m = ManifoldModel::circle();
    let g = build_grid(&m, 50, Bandwidth::Auto, 1).unwrap();
    let obs = vec![FieldObservable::new(&g, &m.eigenfunction(&[1]).unwrap(), 0.5).unwrap()];
    let e = simulate_ensemble(&g, &obs, &config(1, None)).unwrap();
    assert!(!e.mean(0, 5, Quantity::M).se_defined());
    assert!(!e.field_covariance(0, 0, 0.5, 0.0).unwrap().se_defined());
}

#[test]
fn grid_file_preserves_dynamics() {
    let m = ManifoldModel::sphere2();
    let g = build_grid(&m, 300, Bandwidth::Auto, 9).unwrap();
    let mut bytes = Vec::new();
    write_grid(&g, &mut bytes).unwrap();
    let h = read_grid(bytes.as_slice()).unwrap();
    let f = m.eigenfunction(&[2, -1]).unwrap().values(g.points());
    assert_eq!(g.laplacian_apply(&f).unwrap(), h.laplacian_apply(&f).unwrap());
    let obs = vec![FieldObservable::from_values(&g, "f", f.clone(), 0.3).unwrap()];
    let obs_h = vec![FieldObservable::from_values(&h, "f", f, 0.3).unwrap()];
    let mut cfg = config(8, None);
    cfg.rho = 0.3;
    assert_eq!(simulate_ensemble(&g, &obs, &cfg).unwrap().runs, simulate_ensemble(&h, &obs_h, &cfg).unwrap().runs);
}

#[test]
fn covariance_at_n1000_matches_duality() {
    let m = ManifoldModel::circle();
    let g = build_grid(&m, 1000, Bandwidth::Auto, 5).unwrap();
    let obs = vec![FieldObservable::new(&g, &m.eigenfunction(&[1]).unwrap(), 0.5).unwrap()];
    let cfg = EnsembleConfig {
        rho: 0.5,
        horizon: 0.5,
        sample_times: vec![0.0, 0.5],
        replicas: 4000,
        seed: 23,
        threads: None,
        track_gamma: false,
    };
    let e = simulate_ensemble(&g, &obs, &cfg).unwrap();
    let est = e.field_covariance(0, 0, 0.5, 0.0).unwrap();
    let oracle = covariance_oracle_finite_n(&g.spectral_decompose().unwrap(), obs[0].f(), obs[0].f(), 0.5, 0.5).unwrap();
    assert!(est.within(oracle, 4.0), "{est:?} vs {oracle}");
}

#[test]
fn martingale_second_moment_matches_full_chain() {
    let m = ManifoldModel::circle();
    let g = build_grid(&m, 6, Bandwidth::Auto, 1).unwrap();
    let obs = vec![FieldObservable::new(&g, &m.eigenfunction(&[1]).unwrap(), 0.5).unwrap()];
    let cfg = EnsembleConfig {
        rho: 0.5,
        horizon: 1.0,
        sample_times: vec![0.0, 1.0],
        replicas: 100_000,
        seed: 29,
        threads: None,
        track_gamma: false,
    };
    let e = simulate_ensemble(&g, &obs, &cfg).unwrap();
    let m2: Vec<f64> = e.values(0, 1, Quantity::M).iter().map(|x| x * x).collect();
    let est = mean_estimate(&m2).value;
    let exact = BruteForceModel::new(&g, 0.5)
        .unwrap()
        .expectation(&BruteForceObservable::SecondMomentM { f: obs[0].f() }, 1.0)
        .unwrap();
    assert!((est - exact).abs() < 1e-2, "{est} vs {exact}");
}
