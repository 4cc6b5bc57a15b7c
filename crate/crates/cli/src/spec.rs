//! Experiment specification files and population manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wasserstein_sgd::{FiniteSupport, ScheduleMode, StepSchedule};

use crate::error::{CliError, CliResult, PhaseExt};

/// Which closed-form geometry an experiment runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Univariate,
    Copula,
    Spherical,
    ScatterLocation,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::Univariate => "univariate",
            FamilyKind::Copula => "copula",
            FamilyKind::Spherical => "spherical",
            FamilyKind::ScatterLocation => "scatter-location",
        }
    }
}

/// Where the population comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PopulationSpec {
    /// A manifest file listing measure files with weights.
    Manifest { path: PathBuf },
    /// Inline univariate Gaussian components.
    InlineGaussian1d { components: Vec<GaussianComponent> },
    /// A seeded generative model over univariate Gaussians.
    GenerativeGaussian1d {
        mean_range: [f64; 2],
        std_range: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

/// Stopping rule in spec form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StopSpec {
    #[default]
    MaxSteps,
    GradNormBelow {
        threshold: f64,
    },
    W2ToOracleBelow {
        threshold: f64,
    },
}

fn default_schedule() -> StepSchedule {
    StepSchedule::harmonic()
}

fn default_mode() -> ScheduleMode {
    ScheduleMode::Any
}

fn default_batch() -> usize {
    1
}

fn default_steps() -> usize {
    1000
}

fn default_grid() -> usize {
    wasserstein_sgd::quantile::DEFAULT_GRID_SIZE
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Flat experiment description; CLI flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: FamilyKind,
    pub population: PopulationSpec,
    #[serde(default = "default_schedule")]
    pub schedule: StepSchedule,
    #[serde(default = "default_mode")]
    pub schedule_mode: ScheduleMode,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Optional path to a measure file used as the initial iterate;
    /// defaults to the first support atom (standard normal grid for
    /// generative populations).
    #[serde(default)]
    pub init: Option<PathBuf>,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
        serde_json::from_str(&text).in_validation(&format!("{}", path.display()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.schedule
            .validate(self.schedule_mode)
            .in_validation("schedule")?;
        if self.batch_size == 0 {
            return Err(CliError::validation("batch_size must be >= 1"));
        }
        if self.max_steps == 0 {
            return Err(CliError::validation("max_steps must be >= 1"));
        }
        if self.grid_size == 0 {
            return Err(CliError::validation("grid_size must be >= 1"));
        }
        match &self.population {
            PopulationSpec::InlineGaussian1d { components } => {
                if components.is_empty() {
                    return Err(CliError::validation("inline population is empty"));
                }
                for c in components {
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    if !(c.std > 0.0) {
                        return Err(CliError::validation(format!(
                            "component std must be positive, got {}",
                            c.std
                        )));
                    }
                }
                if self.family != FamilyKind::Univariate {
                    return Err(CliError::validation(
                        "inline gaussian components require the univariate family",
                    ));
                }
            }
            PopulationSpec::GenerativeGaussian1d {
                mean_range,
                std_range,
            } => {
                if self.family != FamilyKind::Univariate {
                    return Err(CliError::validation(
                        "generative gaussian populations require the univariate family",
                    ));
                }
                if mean_range[0] > mean_range[1] || std_range[0] > std_range[1] {
                    return Err(CliError::validation("empty parameter range"));
                }
                if std_range[0] <= 0.0 {
                    return Err(CliError::validation("std range must be positive"));
                }
            }
            PopulationSpec::Manifest { .. } => {}
        }
        Ok(())
    }
}

/// Manifest entry: a measure file with its weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub weight: f64,
}

/// Population manifest written by `generate` and `ingest`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub family: FamilyKind,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
        serde_json::from_str(&text).in_validation(&format!("{}", path.display()))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| CliError::io(path, &e))
    }

    /// Resolves entry paths relative to the manifest location.
    pub fn resolved_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.entries
            .iter()
            .map(|e| {
                if e.path.is_absolute() {
                    e.path.clone()
                } else {
                    base.join(&e.path)
                }
            })
            .collect()
    }
}

pub fn read_measure_json<M: serde::de::DeserializeOwned>(path: &Path) -> CliResult<M> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
    serde_json::from_str(&text).in_validation(&format!("{}", path.display()))
}

pub fn write_measure_json<M: Serialize>(path: &Path, measure: &M) -> CliResult<()> {
    let text = serde_json::to_string(measure).expect("measure serializes");
    fs::write(path, text).map_err(|e| CliError::io(path, &e))
}

/// Loads a manifest-backed finite support of family measures.
pub fn load_support<M: serde::de::DeserializeOwned>(
    manifest_path: &Path,
    expected_family: FamilyKind,
) -> CliResult<FiniteSupport<M>> {
    let manifest = Manifest::load(manifest_path)?;
    if manifest.family != expected_family {
        return Err(CliError::validation(format!(
            "manifest family {} does not match requested family {}",
            manifest.family.as_str(),
            expected_family.as_str()
        )));
    }
    if manifest.entries.is_empty() {
        return Err(CliError::validation("manifest lists no measures"));
    }
    let paths = manifest.resolved_paths(manifest_path);
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for (entry, path) in manifest.entries.iter().zip(&paths) {
        let measure: M = read_measure_json(path)?;
        entries.push((entry.weight, measure));
    }
    FiniteSupport::new(entries).in_validation("population weights")
}
