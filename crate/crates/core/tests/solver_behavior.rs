//! Solver-level behavior: convergence trends, batch-size variance
//! reduction, record round-trips, and family closure under long runs.

use rand::Rng;
use wasserstein_sgd::population::{rng_from_seed, sample_batch};
use wasserstein_sgd::quantile::{self, QuantileFamily, QuantileGrid};
use wasserstein_sgd::record::RunRecord;
use wasserstein_sgd::scatter::{self, random_spd, ScatterLocationMeasure, SpdMatrix};
use wasserstein_sgd::solver::{run, BatchSize, SolverConfig};
use wasserstein_sgd::spherical::{self, RadialProfile, SphericalMeasure};
use wasserstein_sgd::{FiniteSupport, PopulationModel, StepSchedule};

/// Convergent schedules drive the functional gap to the barycenter level:
/// the running minimum of `F(mu_k) - F(bary)` drops below `1e-3 F(mu_0)`
/// within 1e4 steps.
#[test]
fn functional_gap_running_minimum_shrinks() {
    let m = 500;
    let pi = PopulationModel::Finite(
        FiniteSupport::new(vec![
            (0.3, QuantileGrid::from_gaussian(1.0, 1.0, m).unwrap()),
            (0.7, QuantileGrid::from_gaussian(3.0, 1.0, m).unwrap()),
        ])
        .unwrap(),
    );
    let finite = pi.as_finite().unwrap();
    let bary = quantile::exact_barycenter(finite).unwrap();
    let f_star = quantile::functional_f(&bary, finite).unwrap();

    let mu0 = QuantileGrid::from_gaussian(0.0, 1.0, m).unwrap();
    let f0 = quantile::functional_f(&mu0, finite).unwrap();
    let cfg = SolverConfig::new(StepSchedule::harmonic(), 10_000, 77);
    let record = run(&QuantileFamily, &pi, &mu0, &cfg).unwrap();
    let mut running_min = f64::INFINITY;
    let mut hit = None;
    for row in &record.scalars {
        running_min = running_min.min(row.f.unwrap() - f_star);
        if running_min < 1e-3 * f0 {
            hit = Some(row.k);
            break;
        }
    }
    assert!(hit.is_some(), "gap never dropped below 1e-3 * F(mu_0)");
}

/// Batch size 16 shrinks the spread of final distances across seeds
/// relative to single-sample steps.
#[test]
fn larger_batches_reduce_run_variance() {
    let m = 200;
    let pi = PopulationModel::Finite(
        FiniteSupport::new(vec![
            (0.3, QuantileGrid::from_gaussian(1.0, 1.0, m).unwrap()),
            (0.7, QuantileGrid::from_gaussian(3.0, 1.0, m).unwrap()),
        ])
        .unwrap(),
    );
    let reference = quantile::exact_barycenter(pi.as_finite().unwrap()).unwrap();
    let mu0 = QuantileGrid::from_gaussian(0.0, 1.0, m).unwrap();

    let spread = |batch: usize| -> f64 {
        let finals: Vec<f64> = (0..50u64)
            .map(|seed| {
                let mut cfg = SolverConfig::new(StepSchedule::harmonic(), 500, seed);
                cfg.batch_size = BatchSize::Constant(batch);
                cfg.reference = Some(reference.clone());
                run(&QuantileFamily, &pi, &mu0, &cfg)
                    .unwrap()
                    .final_scalars()
                    .w2_ref
                    .unwrap()
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (finals.len() - 1) as f64
    };
    let var_single = spread(1);
    let var_batched = spread(16);
    assert!(
        var_batched < var_single,
        "variance with S=16 ({var_batched:.3e}) not below S=1 ({var_single:.3e})"
    );
}

/// Spherical SGD with running-average steps approaches the exact profile
/// average within 1e-2 after 1e4 steps.
#[test]
fn spherical_sgd_limit_matches_oracle() {
    let m = 200;
    let mut rng = rng_from_seed(404);
    let members: Vec<SphericalMeasure> = (0..4)
        .map(|_| {
            let mut acc = 0.0;
            let values = (0..m)
                .map(|_| {
                    acc += rng.gen_range(0.0..0.05);
                    acc
                })
                .collect();
            SphericalMeasure::new("gen", RadialProfile::new(values).unwrap())
        })
        .collect();
    let pi = PopulationModel::Finite(FiniteSupport::uniform(members.clone()).unwrap());
    let oracle = spherical::exact_barycenter(pi.as_finite().unwrap()).unwrap();

    let schedule = StepSchedule::harmonic();
    let mut mu = members[0].clone();
    let mut sgd_rng = rng_from_seed(405);
    for k in 0..10_000 {
        let batch = sample_batch(&pi, 1, &mut sgd_rng).unwrap();
        mu = spherical::sgd_step(&mu, &batch, schedule.gamma(k)).unwrap();
    }
    let gap = spherical::w2(&mu, &oracle).unwrap();
    assert!(gap <= 1e-2, "gap to profile average {gap}");
}

/// Scatter iterates stay inside the family on a population with condition
/// number up to 1e4: the SPD validator accepts every visited covariance.
#[test]
fn scatter_iterates_stay_spd() {
    let q = 4;
    let mut rng = rng_from_seed(505);
    let members: Vec<ScatterLocationMeasure> = (0..3)
        .map(|_| {
            ScatterLocationMeasure::new(
                nalgebra::DVector::from_fn(q, |_, _| rng.gen_range(-1.0..1.0)),
                random_spd(q, 1e4, 1.0, &mut rng),
            )
            .unwrap()
        })
        .collect();
    let pi = PopulationModel::Finite(FiniteSupport::uniform(members.clone()).unwrap());
    let schedule = StepSchedule::harmonic();
    let mut mu = members[0].clone();
    let mut sgd_rng = rng_from_seed(506);
    for k in 0..500 {
        let batch = sample_batch(&pi, 1, &mut sgd_rng).unwrap();
        mu = scatter::sgd_step(&mu, &batch, schedule.gamma(k)).unwrap();
        SpdMatrix::new(mu.cov.matrix().clone())
            .unwrap_or_else(|e| panic!("iterate {k} left the family: {e}"));
    }
}

/// Run records survive JSON round-trips, and the CSV scalar series parses
/// back to the recorded values exactly.
#[test]
fn record_round_trips_through_json_and_csv() {
    let m = 64;
    let pi = PopulationModel::Finite(
        FiniteSupport::new(vec![
            (0.5, QuantileGrid::from_gaussian(-1.0, 1.0, m).unwrap()),
            (0.5, QuantileGrid::from_gaussian(1.0, 2.0, m).unwrap()),
        ])
        .unwrap(),
    );
    let mut cfg = SolverConfig::new(StepSchedule::harmonic(), 20, 3);
    cfg.snapshot_stride = Some(5);
    cfg.reference = Some(quantile::exact_barycenter(pi.as_finite().unwrap()).unwrap());
    let record = run(
        &QuantileFamily,
        &pi,
        &QuantileGrid::from_gaussian(0.0, 1.0, m).unwrap(),
        &cfg,
    )
    .unwrap();

    let json = serde_json::to_string(&record).unwrap();
    let back: RunRecord<QuantileGrid> = serde_json::from_str(&json).unwrap();
    assert_eq!(record, back);

    let csv = record.scalar_csv_string();
    for (line, row) in csv.lines().skip(1).zip(&record.scalars) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), row.k);
        assert_eq!(fields[1].parse::<f64>().unwrap(), row.gamma);
        assert_eq!(fields[2].parse::<f64>().unwrap(), row.f.unwrap());
        assert_eq!(fields[3].parse::<f64>().unwrap(), row.grad_norm_sq.unwrap());
        assert_eq!(fields[4].parse::<f64>().unwrap(), row.w2_ref.unwrap());
    }
}
