//! Consistency checks between family geometries that model the same
//! measures: univariate Gaussians live both in the quantile family and in
//! the one-dimensional scatter-location family, and spherical profiles obey
//! the same calculus as quantile grids.

use wasserstein_sgd::population::{rng_from_seed, sample_batch};
use wasserstein_sgd::quantile::{self, QuantileFamily, QuantileGrid};
use wasserstein_sgd::scatter::{self, ScatterLocationFamily, ScatterLocationMeasure};
use wasserstein_sgd::solver::{run, SolverConfig};
use wasserstein_sgd::spherical::{self, RadialProfile, SphericalMeasure};
use wasserstein_sgd::{BarycenterFamily, FiniteSupport, PopulationModel, StepSchedule};

fn grid_of(m: &ScatterLocationMeasure, size: usize) -> QuantileGrid {
    QuantileGrid::from_gaussian(m.mean[0], m.cov.matrix()[(0, 0)].sqrt(), size).unwrap()
}

/// Closed-form scatter distance vs the quantile-grid quadrature at M = 1e6.
#[test]
fn w2_agrees_between_families() {
    let m1 = ScatterLocationMeasure::univariate(0.0, 1.0).unwrap();
    let m2 = ScatterLocationMeasure::univariate(2.0, 2.0).unwrap();
    let exact = scatter::w2(&m1, &m2).unwrap();
    assert!((exact - 5.0f64.sqrt()).abs() < 1e-12);

    let size = 1_000_000;
    let discretized = quantile::w2(&grid_of(&m1, size), &grid_of(&m2, size)).unwrap();
    assert!(
        (discretized - exact).abs() < 1e-3,
        "grid {discretized} vs closed form {exact}"
    );
}

/// Karcher residual of the scatter family vs the quantile-grid gradient norm
/// on the same univariate configuration.
#[test]
fn karcher_residual_agrees_between_families() {
    let mu = ScatterLocationMeasure::univariate(0.0, 1.0).unwrap();
    let target = ScatterLocationMeasure::univariate(0.0, 2.0).unwrap();
    let pi = FiniteSupport::dirac(target.clone());
    let exact = scatter::karcher_residual(&mu, &pi).unwrap();
    assert!((exact - 1.0).abs() < 1e-12);

    let size = 10_000;
    let pi_grid = FiniteSupport::dirac(grid_of(&target, size));
    let approx = quantile::grad_norm_sq(&grid_of(&mu, size), &pi_grid).unwrap();
    assert!((approx - exact).abs() < 1e-3, "grid {approx} vs {exact}");
}

/// Weighted-std fixed point vs the quantile barycenter of the same
/// Gaussians.
#[test]
fn fixed_point_agrees_with_quantile_barycenter() {
    let pi = FiniteSupport::new(vec![
        (0.3, ScatterLocationMeasure::univariate(0.5, 1.0).unwrap()),
        (0.7, ScatterLocationMeasure::univariate(-1.0, 3.0).unwrap()),
    ])
    .unwrap();
    let fp = scatter::fixed_point_barycenter(&pi, None, 500).unwrap();

    let size = 10_000;
    let pi_grid = FiniteSupport::new(vec![
        (0.3, QuantileGrid::from_gaussian(0.5, 1.0, size).unwrap()),
        (0.7, QuantileGrid::from_gaussian(-1.0, 3.0, size).unwrap()),
    ])
    .unwrap();
    let bary_grid = quantile::exact_barycenter(&pi_grid).unwrap();
    let gap = quantile::w2(&grid_of(&fp.measure, size), &bary_grid).unwrap();
    assert!(gap < 1e-3, "representation gap {gap}");
}

/// The same seed drives both families through the same atom indices, so the
/// trajectories track each other up to grid discretization.
#[test]
fn sgd_trajectories_match_across_families() {
    let size = 10_000;
    let components = [(1.0f64, 1.0f64), (3.0, 1.5), (-0.5, 0.7)];
    let weights = [0.2, 0.5, 0.3];

    let scatter_pi = PopulationModel::Finite(
        FiniteSupport::new(
            weights
                .iter()
                .zip(&components)
                .map(|(w, (b, s))| {
                    (*w, ScatterLocationMeasure::univariate(*b, *s).unwrap())
                })
                .collect(),
        )
        .unwrap(),
    );
    let quantile_pi = PopulationModel::Finite(
        FiniteSupport::new(
            weights
                .iter()
                .zip(&components)
                .map(|(w, (b, s))| (*w, QuantileGrid::from_gaussian(*b, *s, size).unwrap()))
                .collect(),
        )
        .unwrap(),
    );

    let seed = 2718;
    let steps = 200;
    let mut cfg_s = SolverConfig::new(StepSchedule::harmonic(), steps, seed);
    cfg_s.snapshot_stride = Some(20);
    let mut cfg_q = SolverConfig::new(StepSchedule::harmonic(), steps, seed);
    cfg_q.snapshot_stride = Some(20);

    let mu0_s = ScatterLocationMeasure::univariate(0.0, 1.0).unwrap();
    let mu0_q = QuantileGrid::from_gaussian(0.0, 1.0, size).unwrap();

    let rec_s = run(&ScatterLocationFamily, &scatter_pi, &mu0_s, &cfg_s).unwrap();
    let rec_q = run(&QuantileFamily, &quantile_pi, &mu0_q, &cfg_q).unwrap();

    assert_eq!(rec_s.snapshots.len(), rec_q.snapshots.len());
    for (snap_s, snap_q) in rec_s.snapshots.iter().zip(&rec_q.snapshots) {
        assert_eq!(snap_s.k, snap_q.k);
        let gap = quantile::w2(&grid_of(&snap_s.measure, size), &snap_q.measure).unwrap();
        assert!(gap < 1e-3, "k = {}: representation gap {gap}", snap_s.k);
    }
    let gap =
        quantile::w2(&grid_of(&rec_s.final_measure, size), &rec_q.final_measure).unwrap();
    assert!(gap < 1e-3);
}

/// Spherical runs are bit-identical to quantile runs on the same values:
/// profiles in norm-quantile coordinates follow the univariate calculus.
#[test]
fn spherical_trajectories_equal_quantile_trajectories() {
    let m = 64;
    let profile = |scale: f64| -> Vec<f64> {
        (0..m).map(|j| scale * (j as f64 + 0.5) / m as f64).collect()
    };
    let values = [profile(1.0), profile(2.5), profile(0.3)];

    let spherical_pi = PopulationModel::Finite(
        FiniteSupport::uniform(
            values
                .iter()
                .map(|v| SphericalMeasure::new("gen", RadialProfile::new(v.clone()).unwrap()))
                .collect(),
        )
        .unwrap(),
    );
    let quantile_pi = PopulationModel::Finite(
        FiniteSupport::uniform(
            values
                .iter()
                .map(|v| QuantileGrid::new(v.clone()).unwrap())
                .collect(),
        )
        .unwrap(),
    );

    let seed = 99;
    let steps = 128;
    let mut rng_a = rng_from_seed(seed);
    let mut rng_b = rng_from_seed(seed);
    let mut mu_s = SphericalMeasure::new("gen", RadialProfile::new(profile(0.5)).unwrap());
    let mut mu_q = QuantileGrid::new(profile(0.5)).unwrap();
    let schedule = StepSchedule::harmonic();
    for k in 0..steps {
        let batch_s = sample_batch(&spherical_pi, 2, &mut rng_a).unwrap();
        let batch_q = sample_batch(&quantile_pi, 2, &mut rng_b).unwrap();
        mu_s = spherical::sgd_step(&mu_s, &batch_s, schedule.gamma(k)).unwrap();
        mu_q = quantile::sgd_step(&mu_q, &batch_q, schedule.gamma(k)).unwrap();
        assert_eq!(mu_s.profile.values(), mu_q.values(), "diverged at step {k}");
    }
}

/// The family trait exposes the same functional across geometries for
/// matching univariate populations.
#[test]
fn functional_values_agree_for_univariate_populations() {
    let size = 10_000;
    let pairs = [(0.0f64, 1.0f64), (2.0, 1.5)];
    let pi_s = FiniteSupport::uniform(
        pairs
            .iter()
            .map(|(b, s)| ScatterLocationMeasure::univariate(*b, *s).unwrap())
            .collect(),
    )
    .unwrap();
    let pi_q = FiniteSupport::uniform(
        pairs
            .iter()
            .map(|(b, s)| QuantileGrid::from_gaussian(*b, *s, size).unwrap())
            .collect(),
    )
    .unwrap();
    let mu_s = ScatterLocationMeasure::univariate(1.0, 2.0).unwrap();
    let mu_q = QuantileGrid::from_gaussian(1.0, 2.0, size).unwrap();
    let f_s = ScatterLocationFamily.functional_f(&mu_s, &pi_s).unwrap();
    let f_q = QuantileFamily.functional_f(&mu_q, &pi_q).unwrap();
    assert!((f_s - f_q).abs() < 1e-3, "{f_s} vs {f_q}");
    let g_s = ScatterLocationFamily.grad_norm_sq(&mu_s, &pi_s).unwrap();
    let g_q = QuantileFamily.grad_norm_sq(&mu_q, &pi_q).unwrap();
    assert!((g_s - g_q).abs() < 1e-3, "{g_s} vs {g_q}");
}
