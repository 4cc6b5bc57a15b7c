//! Seeded synthetic population generators.

use std::fs;
use std::path::Path;

use rand::Rng;
use wasserstein_sgd::population::{rng_from_seed, RngState};
use wasserstein_sgd::quantile::QuantileGrid;
use wasserstein_sgd::scatter::{random_spd, ScatterLocationMeasure};
use wasserstein_sgd::spherical::{RadialProfile, SphericalMeasure};

use crate::error::{CliError, CliResult, PhaseExt};
use crate::spec::{FamilyKind, Manifest, ManifestEntry, write_measure_json};

/// Parsed `mean,std,weight` component triple.
#[derive(Debug, Clone, Copy)]
pub struct Component {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

/// Parses `"1,1,0.3;3,1,0.7"` into components.
pub fn parse_components(text: &str) -> CliResult<Vec<Component>> {
    let mut out = Vec::new();
    for (i, part) in text.split(';').enumerate() {
        let fields: Vec<&str> = part.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::validation(format!(
                "component {i}: expected mean,std,weight, got {part:?}"
            )));
        }
        let parse = |s: &str, what: &str| -> CliResult<f64> {
            s.parse::<f64>()
                .in_validation(&format!("component {i} {what}"))
        };
        out.push(Component {
            mean: parse(fields[0], "mean")?,
            std: parse(fields[1], "std")?,
            weight: parse(fields[2], "weight")?,
        });
    }
    Ok(out)
}

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, &e))
}

fn write_population<M: serde::Serialize>(
    out_dir: &Path,
    family: FamilyKind,
    seed: u64,
    measures: &[(f64, M)],
) -> CliResult<()> {
    ensure_out_dir(out_dir)?;
    let mut entries = Vec::with_capacity(measures.len());
    for (i, (weight, measure)) in measures.iter().enumerate() {
        let name = format!("m{i:03}.json");
        write_measure_json(&out_dir.join(&name), measure)?;
        entries.push(ManifestEntry {
            path: name.into(),
            weight: *weight,
        });
    }
    Manifest {
        family,
        seed,
        entries,
    }
    .save(&out_dir.join("manifest.json"))
}

/// Univariate Gaussian population from explicit components.
pub fn gaussian1d(
    out_dir: &Path,
    components: &[Component],
    grid_size: usize,
    seed: u64,
) -> CliResult<usize> {
    if components.is_empty() {
        return Err(CliError::validation("no components given"));
    }
    let measures: Vec<(f64, QuantileGrid)> = components
        .iter()
        .map(|c| {
            QuantileGrid::from_gaussian(c.mean, c.std, grid_size)
                .map(|g| (c.weight, g))
                .in_validation("component")
        })
        .collect::<CliResult<_>>()?;
    write_population(out_dir, FamilyKind::Univariate, seed, &measures)?;
    Ok(measures.len())
}

/// Random members of the named log-concave univariate families.
pub fn logconcave(out_dir: &Path, count: usize, grid_size: usize, seed: u64) -> CliResult<usize> {
    if count == 0 {
        return Err(CliError::validation("count must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let weight = 1.0 / count as f64;
    let measures: Vec<(f64, QuantileGrid)> = (0..count)
        .map(|_| {
            let loc = rng.gen_range(-3.0..3.0);
            let scale = rng.gen_range(0.3..3.0);
            let grid = match rng.gen_range(0..5) {
                0 => QuantileGrid::from_gaussian(loc, scale, grid_size),
                1 => QuantileGrid::from_exponential(loc, 1.0 / scale, grid_size),
                2 => QuantileGrid::from_logistic(loc, scale, grid_size),
                3 => QuantileGrid::from_gumbel(loc, scale, grid_size),
                _ => QuantileGrid::from_laplace(loc, scale, grid_size),
            }
            .expect("positive scales give valid grids");
            (weight, grid)
        })
        .collect();
    write_population(out_dir, FamilyKind::Univariate, seed, &measures)?;
    Ok(count)
}

/// Random scatter-location ensemble with bounded condition number.
pub fn spd_ensemble(
    out_dir: &Path,
    dim: usize,
    count: usize,
    max_condition: f64,
    seed: u64,
) -> CliResult<usize> {
    if count == 0 || dim == 0 {
        return Err(CliError::validation("count and dim must be >= 1"));
    }
    if max_condition < 1.0 {
        return Err(CliError::validation("max condition must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let weight = 1.0 / count as f64;
    let measures: Vec<(f64, ScatterLocationMeasure)> = (0..count)
        .map(|_| {
            let mean = nalgebra::DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let cov = random_spd(dim, max_condition, 1.0, &mut rng);
            (
                weight,
                ScatterLocationMeasure::new(mean, cov).expect("dimensions match"),
            )
        })
        .collect();
    write_population(out_dir, FamilyKind::ScatterLocation, seed, &measures)?;
    Ok(count)
}

/// Random nondecreasing radial profiles over a shared generator tag.
pub fn profiles(out_dir: &Path, count: usize, grid_size: usize, seed: u64) -> CliResult<usize> {
    if count == 0 {
        return Err(CliError::validation("count must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let weight = 1.0 / count as f64;
    let measures: Vec<(f64, SphericalMeasure)> = (0..count)
        .map(|_| {
            let mut acc: f64 = rng.gen_range(0.0..0.2);
            let values: Vec<f64> = (0..grid_size)
                .map(|_| {
                    acc += rng.gen_range(0.0..4.0) / grid_size as f64;
                    acc
                })
                .collect();
            (
                weight,
                SphericalMeasure::new("gen", RadialProfile::new(values).expect("monotone")),
            )
        })
        .collect();
    write_population(out_dir, FamilyKind::Spherical, seed, &measures)?;
    Ok(count)
}

/// Generative sampler used by `generative-gaussian1d` populations: draws in
/// the configured ranges, applied to a cached standard normal grid.
pub fn gaussian_sampler(
    mean_range: [f64; 2],
    std_range: [f64; 2],
    grid_size: usize,
) -> impl Fn(&mut RngState) -> QuantileGrid + Send + Sync + 'static {
    let base = QuantileGrid::from_gaussian(0.0, 1.0, grid_size)
        .expect("unit gaussian grid")
        .values()
        .to_vec();
    move |rng: &mut RngState| {
        let mean = if mean_range[0] < mean_range[1] {
            rng.gen_range(mean_range[0]..mean_range[1])
        } else {
            mean_range[0]
        };
        let std = if std_range[0] < std_range[1] {
            rng.gen_range(std_range[0]..std_range[1])
        } else {
            std_range[0]
        };
        QuantileGrid::new(base.iter().map(|z| mean + std * z).collect())
            .expect("affine image of a monotone grid")
    }
}
