//! `run`, `compare`, and `validate` command implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wasserstein_sgd::copula::CopulaFamily;
use wasserstein_sgd::population::GenerativeModel;
use wasserstein_sgd::quantile::{QuantileFamily, QuantileGrid};
use wasserstein_sgd::scatter::{self, ScatterLocationFamily};
use wasserstein_sgd::solver::{self, BatchSize, SolverConfig, StoppingRule};
use wasserstein_sgd::spherical::SphericalFamily;
use wasserstein_sgd::{BarycenterFamily, FiniteSupport, PopulationModel};

use crate::error::{CliError, CliResult, PhaseExt};
use crate::generate::gaussian_sampler;
use crate::spec::{
    load_support, read_measure_json, ExperimentSpec, FamilyKind, PopulationSpec, StopSpec,
};

/// A loaded experiment: population, initial iterate, and the family driver,
/// monomorphized per family kind.
enum Problem {
    Univariate(PopulationModel<QuantileGrid>, QuantileGrid),
    Copula(
        PopulationModel<wasserstein_sgd::copula::CopulaMeasure>,
        wasserstein_sgd::copula::CopulaMeasure,
    ),
    Spherical(
        PopulationModel<wasserstein_sgd::spherical::SphericalMeasure>,
        wasserstein_sgd::spherical::SphericalMeasure,
    ),
    Scatter(
        PopulationModel<wasserstein_sgd::scatter::ScatterLocationMeasure>,
        wasserstein_sgd::scatter::ScatterLocationMeasure,
    ),
}

fn initial_measure<M: serde::de::DeserializeOwned + Clone>(
    spec: &ExperimentSpec,
    support: &FiniteSupport<M>,
) -> CliResult<M> {
    match &spec.init {
        Some(path) => read_measure_json(path),
        None => Ok(support.measure(0).clone()),
    }
}

/// Loads and cross-validates the population named by the spec.
pub fn load_problem(spec: &ExperimentSpec) -> CliResult<()> {
    build_problem(spec).map(|_| ())
}

fn build_problem(spec: &ExperimentSpec) -> CliResult<Problem> {
    spec.validate()?;
    match (&spec.population, spec.family) {
        (PopulationSpec::InlineGaussian1d { components }, FamilyKind::Univariate) => {
            let entries = components
                .iter()
                .map(|c| {
                    QuantileGrid::from_gaussian(c.mean, c.std, spec.grid_size)
                        .map(|g| (c.weight, g))
                })
                .collect::<Result<Vec<_>, _>>()
                .in_validation("inline components")?;
            let support = FiniteSupport::new(entries).in_validation("population weights")?;
            let mu0 = initial_measure(spec, &support)?;
            check_univariate(&support, &mu0)?;
            Ok(Problem::Univariate(PopulationModel::Finite(support), mu0))
        }
        (
            PopulationSpec::GenerativeGaussian1d {
                mean_range,
                std_range,
            },
            FamilyKind::Univariate,
        ) => {
            let sampler = gaussian_sampler(*mean_range, *std_range, spec.grid_size);
            let mu0 = match &spec.init {
                Some(path) => read_measure_json(path)?,
                None => QuantileGrid::from_gaussian(0.0, 1.0, spec.grid_size)
                    .expect("unit gaussian grid"),
            };
            Ok(Problem::Univariate(
                PopulationModel::Generative(GenerativeModel::new(sampler)),
                mu0,
            ))
        }
        (PopulationSpec::Manifest { path }, family) => match family {
            FamilyKind::Univariate => {
                let support = load_support::<QuantileGrid>(path, family)?;
                let mu0 = initial_measure(spec, &support)?;
                check_univariate(&support, &mu0)?;
                Ok(Problem::Univariate(PopulationModel::Finite(support), mu0))
            }
            FamilyKind::Copula => {
                let support =
                    load_support::<wasserstein_sgd::copula::CopulaMeasure>(path, family)?;
                let mu0 = initial_measure(spec, &support)?;
                let first = support.measure(0);
                for (_, m) in support.iter() {
                    if m.copula != first.copula || m.dim() != first.dim() {
                        return Err(CliError::validation(
                            "population members disagree on copula or dimension",
                        ));
                    }
                }
                if mu0.copula != first.copula {
                    return Err(CliError::validation(
                        "initial measure does not share the population copula",
                    ));
                }
                Ok(Problem::Copula(PopulationModel::Finite(support), mu0))
            }
            FamilyKind::Spherical => {
                let support =
                    load_support::<wasserstein_sgd::spherical::SphericalMeasure>(path, family)?;
                let mu0 = initial_measure(spec, &support)?;
                let first = support.measure(0);
                for (_, m) in support.iter() {
                    if m.generator != first.generator
                        || m.profile.len() != first.profile.len()
                    {
                        return Err(CliError::validation(
                            "population members disagree on generator or grid size",
                        ));
                    }
                }
                Ok(Problem::Spherical(PopulationModel::Finite(support), mu0))
            }
            FamilyKind::ScatterLocation => {
                let support =
                    load_support::<wasserstein_sgd::scatter::ScatterLocationMeasure>(
                        path, family,
                    )?;
                let mu0 = initial_measure(spec, &support)?;
                let q = support.measure(0).dim();
                for (_, m) in support.iter() {
                    if m.dim() != q {
                        return Err(CliError::validation(
                            "population members disagree on dimension",
                        ));
                    }
                }
                if mu0.dim() != q {
                    return Err(CliError::validation("initial measure dimension mismatch"));
                }
                Ok(Problem::Scatter(PopulationModel::Finite(support), mu0))
            }
        },
        (_, family) => Err(CliError::validation(format!(
            "population kind not supported for the {} family",
            family.as_str()
        ))),
    }
}

fn check_univariate(
    support: &FiniteSupport<QuantileGrid>,
    mu0: &QuantileGrid,
) -> CliResult<()> {
    let m = support.measure(0).len();
    if support.measures().any(|g| g.len() != m) || mu0.len() != m {
        return Err(CliError::validation(
            "population members disagree on grid size",
        ));
    }
    Ok(())
}

fn solver_config<M: Clone>(spec: &ExperimentSpec, reference: Option<M>) -> SolverConfig<M> {
    let mut cfg = SolverConfig::new(spec.schedule.clone(), spec.max_steps, spec.seed);
    cfg.schedule_mode = spec.schedule_mode;
    cfg.batch_size = BatchSize::Constant(spec.batch_size);
    cfg.snapshot_stride = spec.snapshot_stride;
    cfg.stopping = match spec.stop {
        StopSpec::MaxSteps => StoppingRule::MaxSteps,
        StopSpec::GradNormBelow { threshold } => StoppingRule::GradNormBelow(threshold),
        StopSpec::W2ToOracleBelow { threshold } => StoppingRule::W2ToReferenceBelow(threshold),
    };
    cfg.reference = reference;
    cfg
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, &e))
}

fn execute_run<F>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu0: &F::Measure,
    spec: &ExperimentSpec,
) -> CliResult<()>
where
    F: BarycenterFamily,
    F::Measure: Serialize,
{
    let oracle = match pi.as_finite() {
        Some(fs) => Some(
            family
                .exact_barycenter(fs)
                .in_run("barycenter oracle")?,
        ),
        None => None,
    };
    let cfg = solver_config(spec, oracle);
    let record = solver::run(family, pi, mu0, &cfg).in_run("solver")?;

    fs::create_dir_all(&spec.out_dir).map_err(|e| CliError::io(&spec.out_dir, &e))?;
    let record_path = spec.out_dir.join("record.json");
    write_text(
        &record_path,
        &serde_json::to_string(&record).expect("record serializes"),
    )?;
    let csv_path = spec.out_dir.join("trajectory.csv");
    write_text(&csv_path, &record.scalar_csv_string())?;

    let last = record.final_scalars();
    println!(
        "run complete: family={} steps={} wall={:.3}s",
        record.family, record.steps_executed, record.wall_time_secs
    );
    if let Some(f) = last.f {
        println!("final F            = {f:.6e}");
    }
    if let Some(g) = last.grad_norm_sq {
        println!("final grad_norm_sq = {g:.6e}");
    }
    if let Some(d) = last.w2_ref {
        println!("final w2 to oracle = {d:.6e}");
    }
    println!("record: {}", record_path.display());
    println!("scalars: {}", csv_path.display());
    Ok(())
}

/// Runs the experiment described by the spec, writing the record and the
/// scalar CSV under the output directory.
pub fn cmd_run(spec: &ExperimentSpec) -> CliResult<()> {
    match build_problem(spec)? {
        Problem::Univariate(pi, mu0) => execute_run(&QuantileFamily, &pi, &mu0, spec),
        Problem::Copula(pi, mu0) => execute_run(&CopulaFamily, &pi, &mu0, spec),
        Problem::Spherical(pi, mu0) => execute_run(&SphericalFamily, &pi, &mu0, spec),
        Problem::Scatter(pi, mu0) => execute_run(&ScatterLocationFamily, &pi, &mu0, spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CompareMode {
    /// Fixed-point iteration vs SGD on the same finite population.
    Methods,
    /// Integrated variance of the gradient estimator across batch sizes.
    Variance,
}

struct MethodRow {
    method: &'static str,
    steps: usize,
    f_gap: f64,
    w2_to_oracle: f64,
    wall_time_s: f64,
}

fn compare_methods<F>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu0: &F::Measure,
    spec: &ExperimentSpec,
    oracle_steps: impl FnOnce(&FiniteSupport<F::Measure>) -> CliResult<(F::Measure, usize)>,
) -> CliResult<Vec<MethodRow>>
where
    F: BarycenterFamily,
{
    let finite = pi
        .as_finite()
        .ok_or_else(|| CliError::validation("method comparison requires a finite population"))?;

    let started = Instant::now();
    let (oracle, oracle_iterations) = oracle_steps(finite)?;
    let oracle_time = started.elapsed().as_secs_f64();
    let f_oracle = family.functional_f(&oracle, finite).in_run("functional")?;

    let cfg = solver_config(spec, None);
    let started = Instant::now();
    let record = solver::run(family, pi, mu0, &cfg).in_run("solver")?;
    let sgd_time = started.elapsed().as_secs_f64();
    let f_sgd = family
        .functional_f(&record.final_measure, finite)
        .in_run("functional")?;
    let w2_sgd = family
        .w2(&record.final_measure, &oracle)
        .in_run("distance")?;

    Ok(vec![
        MethodRow {
            method: "fixed-point",
            steps: oracle_iterations,
            f_gap: 0.0,
            w2_to_oracle: 0.0,
            wall_time_s: oracle_time,
        },
        MethodRow {
            method: "sgd",
            steps: record.steps_executed,
            f_gap: f_sgd - f_oracle,
            w2_to_oracle: w2_sgd,
            wall_time_s: sgd_time,
        },
    ])
}

fn print_method_rows(rows: &[MethodRow], out_dir: &Path) -> CliResult<()> {
    let mut csv = String::from("method,steps,final_f_gap,final_w2_to_oracle,wall_time_s\n");
    println!(
        "{:<12} {:>8} {:>14} {:>18} {:>12}",
        "method", "steps", "final F gap", "final w2 to oracle", "wall time s"
    );
    for row in rows {
        println!(
            "{:<12} {:>8} {:>14.6e} {:>18.6e} {:>12.4}",
            row.method, row.steps, row.f_gap, row.w2_to_oracle, row.wall_time_s
        );
        csv.push_str(&format!(
            "{},{},{:?},{:?},{:?}\n",
            row.method, row.steps, row.f_gap, row.w2_to_oracle, row.wall_time_s
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, &e))?;
    let path = out_dir.join("compare_methods.csv");
    write_text(&path, &csv)?;
    println!("table: {}", path.display());
    Ok(())
}

fn compare_variance<F>(
    family: &F,
    pi: &PopulationModel<F::Measure>,
    mu0: &F::Measure,
    spec: &ExperimentSpec,
    batch_sizes: &[usize],
    n_mc: usize,
) -> CliResult<()>
where
    F: BarycenterFamily,
{
    let mut csv = String::from("batch_size,v_s,v_s_times_s,se\n");
    println!(
        "{:>10} {:>14} {:>14} {:>12}",
        "batch S", "V_S", "S * V_S", "std error"
    );
    for (i, &s) in batch_sizes.iter().enumerate() {
        let est = solver::integrated_variance(family, pi, mu0, s, n_mc, spec.seed + i as u64)
            .in_run("integrated variance")?;
        println!(
            "{:>10} {:>14.6e} {:>14.6e} {:>12.3e}",
            s,
            est.variance,
            s as f64 * est.variance,
            est.se
        );
        csv.push_str(&format!(
            "{},{:?},{:?},{:?}\n",
            s,
            est.variance,
            s as f64 * est.variance,
            est.se
        ));
    }
    fs::create_dir_all(&spec.out_dir).map_err(|e| CliError::io(&spec.out_dir, &e))?;
    let path = spec.out_dir.join("compare_variance.csv");
    write_text(&path, &csv)?;
    println!("table: {}", path.display());
    Ok(())
}

/// Compares solution methods, or the variance of gradient estimates across
/// batch sizes, on the population described by the spec.
pub fn cmd_compare(
    spec: &ExperimentSpec,
    mode: CompareMode,
    batch_sizes: &[usize],
    n_mc: usize,
) -> CliResult<()> {
    let problem = build_problem(spec)?;
    match mode {
        CompareMode::Methods => {
            let rows = match &problem {
                Problem::Univariate(pi, mu0) => {
                    compare_methods(&QuantileFamily, pi, mu0, spec, |fs| {
                        QuantileFamily
                            .exact_barycenter(fs)
                            .map(|m| (m, 1))
                            .in_run("barycenter oracle")
                    })?
                }
                Problem::Copula(pi, mu0) => {
                    compare_methods(&CopulaFamily, pi, mu0, spec, |fs| {
                        CopulaFamily
                            .exact_barycenter(fs)
                            .map(|m| (m, 1))
                            .in_run("barycenter oracle")
                    })?
                }
                Problem::Spherical(pi, mu0) => {
                    compare_methods(&SphericalFamily, pi, mu0, spec, |fs| {
                        SphericalFamily
                            .exact_barycenter(fs)
                            .map(|m| (m, 1))
                            .in_run("barycenter oracle")
                    })?
                }
                Problem::Scatter(pi, mu0) => {
                    compare_methods(&ScatterLocationFamily, pi, mu0, spec, |fs| {
                        scatter::fixed_point_barycenter(fs, None, 500)
                            .map(|fp| (fp.measure, fp.iterations))
                            .in_run("fixed-point iteration")
                    })?
                }
            };
            print_method_rows(&rows, &spec.out_dir)
        }
        CompareMode::Variance => match &problem {
            Problem::Univariate(pi, mu0) => {
                compare_variance(&QuantileFamily, pi, mu0, spec, batch_sizes, n_mc)
            }
            Problem::Copula(pi, mu0) => {
                compare_variance(&CopulaFamily, pi, mu0, spec, batch_sizes, n_mc)
            }
            Problem::Spherical(pi, mu0) => {
                compare_variance(&SphericalFamily, pi, mu0, spec, batch_sizes, n_mc)
            }
            Problem::Scatter(pi, mu0) => {
                compare_variance(&ScatterLocationFamily, pi, mu0, spec, batch_sizes, n_mc)
            }
        },
    }
}

/// Validates the spec and every referenced population file.
pub fn cmd_validate(spec: &ExperimentSpec) -> CliResult<()> {
    load_problem(spec)?;
    println!("ok: spec and population validate");
    Ok(())
}

/// The out-dir override hook used by main.
pub fn apply_overrides(
    spec: &mut ExperimentSpec,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    max_steps: Option<usize>,
    batch_size: Option<usize>,
) {
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(dir) = out_dir {
        spec.out_dir = dir;
    }
    if let Some(steps) = max_steps {
        spec.max_steps = steps;
    }
    if let Some(batch) = batch_size {
        spec.batch_size = batch;
    }
}
