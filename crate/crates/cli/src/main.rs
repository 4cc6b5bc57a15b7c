//! `wsgd`: populations, runs, and method comparisons for Wasserstein
//! barycenter SGD, driven by flat JSON experiment specs.

mod error;
mod generate;
mod ingest;
mod runcmd;
mod spec;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use wasserstein_sgd::copula::Copula;

use error::{CliError, CliResult, PhaseExt};
use runcmd::CompareMode;
use spec::{ExperimentSpec, FamilyKind};

#[derive(Parser)]
#[command(name = "wsgd", version, about = "Wasserstein barycenter SGD toolkit")]
struct Cli {
    /// Override the seed from the experiment spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Experiment spec file (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic population (measure files plus manifest).
    Generate {
        #[command(subcommand)]
        preset: GeneratePreset,
    },
    /// Convert CSV observation files into measure files plus a manifest.
    Ingest {
        /// CSV files, one measure each; rows are observations.
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "univariate")]
        family: FamilyKind,
        #[arg(long, default_value_t = 1000)]
        grid_size: usize,
        /// Copula declared for multi-column ingestion.
        #[arg(long, value_enum, default_value = "independence")]
        copula: CopulaKind,
        /// Correlation matrix (JSON array of rows) for the gaussian copula.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Execute the SGD run described by the experiment spec.
    Run {
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Compare methods or batch-size variance on one population.
    Compare {
        #[arg(long, value_enum, default_value = "methods")]
        mode: CompareMode,
        /// Batch sizes for variance mode.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8, 16])]
        batch_sizes: Vec<usize>,
        /// Monte Carlo batches per batch size in variance mode.
        #[arg(long, default_value_t = 20_000)]
        n_mc: usize,
    },
    /// Validate the experiment spec and its population files.
    Validate,
}

#[derive(Subcommand)]
enum GeneratePreset {
    /// Univariate Gaussians from explicit `mean,std,weight;...` components.
    Gaussian1d {
        #[arg(long)]
        components: String,
        #[arg(long, default_value_t = 1000)]
        grid_size: usize,
    },
    /// Random members of the named log-concave univariate families.
    Logconcave {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 1000)]
        grid_size: usize,
    },
    /// Random scatter-location ensemble with bounded condition number.
    Spd {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 100.0)]
        max_condition: f64,
    },
    /// Random nondecreasing radial profiles over a shared generator.
    Profiles {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 1000)]
        grid_size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CopulaKind {
    Independence,
    Gaussian,
}

fn load_spec(cli: &Cli) -> CliResult<ExperimentSpec> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::validation("this command needs --config <spec.json>"))?;
    ExperimentSpec::load(path)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Generate { ref preset } => {
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
            let seed = seed.unwrap_or(0);
            let written = match preset {
                GeneratePreset::Gaussian1d {
                    components,
                    grid_size,
                } => {
                    let components = generate::parse_components(components)?;
                    generate::gaussian1d(&dir, &components, *grid_size, seed)?
                }
                GeneratePreset::Logconcave { count, grid_size } => {
                    generate::logconcave(&dir, *count, *grid_size, seed)?
                }
                GeneratePreset::Spd {
                    dim,
                    count,
                    max_condition,
                } => generate::spd_ensemble(&dir, *dim, *count, *max_condition, seed)?,
                GeneratePreset::Profiles { count, grid_size } => {
                    generate::profiles(&dir, *count, *grid_size, seed)?
                }
            };
            println!(
                "wrote {written} measures and manifest to {}",
                dir.display()
            );
            Ok(())
        }
        Command::Ingest {
            ref files,
            family,
            grid_size,
            copula,
            ref rho,
        } => {
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
            let copula = match (family, copula) {
                (FamilyKind::Copula, CopulaKind::Independence) => Some(Copula::Independence),
                (FamilyKind::Copula, CopulaKind::Gaussian) => {
                    let path = rho.as_ref().ok_or_else(|| {
                        CliError::validation("gaussian copula ingestion needs --rho <file>")
                    })?;
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::io(path, &e))?;
                    let rho: Vec<Vec<f64>> =
                        serde_json::from_str(&text).in_validation("rho matrix")?;
                    Some(Copula::Gaussian { rho })
                }
                _ => None,
            };
            let report = ingest::ingest(files, family, grid_size, copula, &dir)?;
            for item in &report {
                println!(
                    "{}: {} observations, {} column(s)",
                    item.measure_path.display(),
                    item.rows,
                    item.dim
                );
            }
            println!(
                "wrote {} measures and manifest to {}",
                report.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Run {
            max_steps,
            batch_size,
        } => {
            let mut spec = load_spec(&cli)?;
            runcmd::apply_overrides(&mut spec, seed, out_dir, max_steps, batch_size);
            runcmd::cmd_run(&spec)
        }
        Command::Compare {
            mode,
            ref batch_sizes,
            n_mc,
        } => {
            let mut spec = load_spec(&cli)?;
            runcmd::apply_overrides(&mut spec, seed, out_dir, None, None);
            runcmd::cmd_compare(&spec, mode, batch_sizes, n_mc)
        }
        Command::Validate => {
            let mut spec = load_spec(&cli)?;
            runcmd::apply_overrides(&mut spec, seed, out_dir, None, None);
            runcmd::cmd_validate(&spec)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version displays are successful exits; anything else
            // is a usage problem, reported under the validation exit code.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
