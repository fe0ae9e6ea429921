use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use herit_cli::config::ExperimentConfig;
use herit_cli::presets;
use herit_cli::runner;
use herit_core::estimators::{
    asymptotic_se, c_heritability_mle, he_regression, ml_two_component, mle_single_kernel,
    AsymptoticVariance, MleOptions, TwoComponentOptions,
};
use herit_core::kernels::{euclidean_grm, mahalanobis_grm, whitened_design};
use herit_core::model::{
    center, standardize, standardize_with_sample_mafs, GenotypeMatrix, HeritabilityEstimate,
    KernelMatrix, LDMatrix, ProjectionSpec, TwoComponentEstimate,
};
use herit_core::truth::truth_report;
use herit_core::Error;

#[derive(Parser)]
#[command(
    name = "herit",
    version,
    about = "Heritability estimation and simulation for linear-model GWAS data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate genotypes, effects and phenotypes from a config or preset.
    Simulate(SimulateArgs),
    /// Compute a genetic relationship matrix from genotypes.
    Grm(GrmArgs),
    /// Fit one estimator to a dataset on disk.
    Estimate(EstimateArgs),
    /// Ground-truth heritability for a known effect vector and LD matrix.
    Truth(TruthArgs),
    /// Run a declarative experiment end to end (simulate -> estimate -> summarize).
    Experiment(ExperimentArgs),
    /// List or dump the shipped experiment presets.
    Presets(PresetsArgs),
}

#[derive(Args)]
struct ConfigSource {
    /// Path to a TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset (see `herit presets --list`).
    #[arg(long)]
    preset: Option<String>,
    /// Use the full-scale (m = 10^4) variant of a preset.
    #[arg(long, requires = "preset")]
    full_scale: bool,
}

impl ConfigSource {
    fn load(&self) -> Result<(ExperimentConfig, Option<PathBuf>), Error> {
        match (&self.config, &self.preset) {
            (Some(path), None) => {
                let cfg = ExperimentConfig::load(path)?;
                Ok((cfg, path.parent().map(|p| p.to_path_buf())))
            }
            (None, Some(name)) => Ok((presets::preset(name, self.full_scale)?, None)),
            _ => Err(Error::Invalid(
                "provide exactly one of --config or --preset".into(),
            )),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Euclidean,
    Mahalanobis,
}

#[derive(Args)]
struct GenotypeInput {
    /// Header-less CSV of genotypes, n rows by m columns.
    #[arg(long)]
    genotypes: PathBuf,
    /// Treat the genotype file as raw 0/1/2 counts (requires --mafs or
    /// --sample-mafs to standardize).
    #[arg(long)]
    raw: bool,
    /// MAF file (one frequency per line) used to standardize raw counts.
    #[arg(long)]
    mafs: Option<PathBuf>,
    /// Standardize raw counts with MAFs estimated from the sample itself
    /// instead of a supplied file.
    #[arg(long, conflicts_with = "mafs")]
    sample_mafs: bool,
}

impl GenotypeInput {
    fn load(&self) -> Result<GenotypeMatrix, Error> {
        if !self.raw {
            if self.mafs.is_some() || self.sample_mafs {
                return Err(Error::Invalid(
                    "--mafs/--sample-mafs only apply with --raw".into(),
                ));
            }
            let z = herit_core::io::read_matrix_csv(&self.genotypes)?;
            return GenotypeMatrix::from_standardized(z);
        }
        match (&self.mafs, self.sample_mafs) {
            (Some(path), false) => {
                let mafs = herit_core::io::read_maf_file(path)?;
                let raw = herit_core::io::read_raw_genotypes_csv(&self.genotypes, mafs.clone())?;
                standardize(&raw, &mafs)
            }
            (None, true) => {
                // placeholder MAFs carry the dimension; estimation replaces them
                let probe = herit_core::io::read_matrix_csv(&self.genotypes)?;
                let mafs =
                    herit_core::model::MafVector::new(vec![0.5; probe.ncols()]).expect("valid");
                let raw = herit_core::io::read_raw_genotypes_csv(&self.genotypes, mafs)?;
                let (z, _) = standardize_with_sample_mafs(&raw)?;
                Ok(z)
            }
            _ => Err(Error::Invalid(
                "--raw requires exactly one of --mafs <file> or --sample-mafs".into(),
            )),
        }
    }
}

#[derive(Args)]
struct GrmArgs {
    /// Kernel to compute.
    #[arg(long, value_enum)]
    kernel: KernelArg,
    #[command(flatten)]
    genotypes: GenotypeInput,
    /// LD matrix CSV (required for the Mahalanobis kernel).
    #[arg(long)]
    ld: Option<PathBuf>,
    /// Output CSV path for the n x n kernel.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mle,
    He,
    Cmle,
    #[value(name = "two-comp")]
    TwoComp,
}

#[derive(Args)]
struct EstimateArgs {
    /// Estimator to fit.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// GRM kernel for mle/he.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[command(flatten)]
    genotypes: GenotypeInput,
    /// Phenotype file, one real per line (centered on ingestion).
    #[arg(long)]
    phenotypes: PathBuf,
    /// LD matrix CSV (Mahalanobis kernel, cmle).
    #[arg(long)]
    ld: Option<PathBuf>,
    /// Subset file, one 1-based SNP index per line (cmle, two-comp).
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TruthArgs {
    /// Effect vector file: one value per line, or the simulator's effects.csv.
    #[arg(long)]
    effects: PathBuf,
    /// LD matrix CSV.
    #[arg(long)]
    ld: PathBuf,
    /// Noise variance.
    #[arg(long = "sigma-e2")]
    sigma_e2: f64,
    /// Subset files (repeatable); each is one 1-based index per line.
    #[arg(long)]
    subset: Vec<PathBuf>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Output directory (replicates.csv, summary.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replicate-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct PresetsArgs {
    /// List available presets.
    #[arg(long)]
    list: bool,
    /// Print one preset's TOML.
    #[arg(long)]
    dump: Option<String>,
    /// Dump the full-scale variant.
    #[arg(long, requires = "dump")]
    full_scale: bool,
}

/// Exit codes: 0 success, 2 configuration/input error, 3 numerical failure
/// threshold exceeded.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invalid(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::DimensionMismatch { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate(args) => {
            let (config, base) = args.source.load()?;
            let manifest = runner::run_simulation(&config, base.as_deref(), &args.out)?;
            eprintln!(
                "wrote {} replicates to {} (config {})",
                manifest.replicates,
                args.out.display(),
                manifest.config_hash
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Grm(args) => {
            let z = args.genotypes.load()?;
            let kernel = match args.kernel {
                KernelArg::Euclidean => euclidean_grm(&z),
                KernelArg::Mahalanobis => {
                    let ld = load_ld(args.ld.as_deref(), z.m())?;
                    mahalanobis_grm(&z, &ld)?
                }
            };
            herit_core::io::write_matrix_csv(&args.out, kernel.matrix())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate(args) => {
            run_estimate(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Truth(args) => {
            let u_values = herit_core::io::read_effects_file(&args.effects)?;
            let ld = herit_core::io::read_ld_csv(&args.ld)?;
            if u_values.len() != ld.dim() {
                return Err(Error::DimensionMismatch {
                    context: "effects length vs LD dimension",
                    expected: ld.dim(),
                    found: u_values.len(),
                });
            }
            let causal: Vec<usize> =
                (0..u_values.len()).filter(|&j| u_values[j] != 0.0).collect();
            let psi = vec![0.0; causal.len()];
            let u = herit_core::model::EffectVector::new(u_values, causal, psi, 0.0)?;
            let mut subsets = Vec::new();
            for (i, path) in args.subset.iter().enumerate() {
                let idx = herit_core::io::read_subset_file(path, ld.dim())?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| format!("subset{i}"));
                subsets.push((name, idx));
            }
            let report = truth_report(&u, &ld, args.sigma_e2, &subsets, &[])?;
            write_json(&args.out, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment(args) => {
            let (config, base) = args.source.load()?;
            let threads = if args.threads == 0 {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            } else {
                args.threads
            };
            let result = runner::run_experiment(&config, base.as_deref(), threads)?;
            runner::write_outputs(&result, &args.out)?;
            eprintln!(
                "experiment {} finished: {} rows, flagged fraction {:.4}, {:.1}s",
                result.manifest.name,
                result.rows.len(),
                result.manifest.flagged_fraction,
                result.manifest.wall_time_secs
            );
            if result.exceeds_flag_threshold() {
                eprintln!(
                    "error: flagged fraction {:.4} exceeds {}",
                    result.manifest.flagged_fraction,
                    runner::FLAG_FAILURE_THRESHOLD
                );
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets(args) => {
            if let Some(name) = &args.dump {
                match presets::preset_source(name, args.full_scale) {
                    Some(text) => print!("{text}"),
                    None => {
                        return Err(Error::Invalid(format!("unknown preset {name:?}")));
                    }
                }
            } else {
                for name in presets::PRESET_NAMES {
                    println!("{name}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_ld(path: Option<&Path>, m: usize) -> Result<LDMatrix, Error> {
    let path = path.ok_or_else(|| Error::Invalid("--ld is required for this operation".into()))?;
    let ld = herit_core::io::read_ld_csv(path)?;
    if ld.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "LD dimension vs genotype columns",
            expected: m,
            found: ld.dim(),
        });
    }
    Ok(ld)
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    method: &'a str,
    kernel: Option<&'a str>,
    estimate: Option<&'a HeritabilityEstimate>,
    asymptotic: Option<&'a AsymptoticVariance>,
    two_component: Option<&'a TwoComponentEstimate>,
}

fn run_estimate(args: EstimateArgs) -> Result<(), Error> {
    let z = args.genotypes.load()?;
    let y_raw = herit_core::io::read_vector(&args.phenotypes)?;
    let y = center(&y_raw)?;
    let opts = MleOptions::default();
    let subset = args
        .subset
        .as_ref()
        .map(|p| herit_core::io::read_subset_file(p, z.m()))
        .transpose()?;

    let kernel_name = |k: KernelArg| match k {
        KernelArg::Euclidean => "euclidean",
        KernelArg::Mahalanobis => "mahalanobis",
    };

    match args.method {
        MethodArg::Mle | MethodArg::He => {
            let karg = args.kernel.ok_or_else(|| {
                Error::Invalid("--kernel is required for mle/he".into())
            })?;
            let kernel: KernelMatrix = match karg {
                KernelArg::Euclidean => euclidean_grm(&z),
                KernelArg::Mahalanobis => {
                    let ld = load_ld(args.ld.as_deref(), z.m())?;
                    mahalanobis_grm(&z, &ld)?
                }
            };
            let est = if args.method == MethodArg::Mle {
                mle_single_kernel(&y, &kernel, &opts)?
            } else {
                he_regression(&y, &kernel)?
            };
            write_json(
                &args.out,
                &EstimateReport {
                    method: if args.method == MethodArg::Mle { "mle" } else { "he" },
                    kernel: Some(kernel_name(karg)),
                    estimate: Some(&est),
                    asymptotic: None,
                    two_component: None,
                },
            )
        }
        MethodArg::Cmle => {
            let ld = load_ld(args.ld.as_deref(), z.m())?;
            let projection = match &subset {
                Some(s) => ProjectionSpec::subset(s.clone(), z.m())?,
                None => ProjectionSpec::Identity,
            };
            let w = whitened_design(&z, &ld, &projection)?;
            let est = c_heritability_mle(&y, &w, &opts)?;
            let av = asymptotic_se(&w, est.eta2_hat, est.sigma2_hat)?;
            write_json(
                &args.out,
                &EstimateReport {
                    method: "cmle",
                    kernel: None,
                    estimate: Some(&est),
                    asymptotic: Some(&av),
                    two_component: None,
                },
            )
        }
        MethodArg::TwoComp => {
            let s = subset.ok_or_else(|| {
                Error::Invalid("--subset is required for two-comp".into())
            })?;
            let est = ml_two_component(&y, &z, &s, &TwoComponentOptions::default())?;
            write_json(
                &args.out,
                &EstimateReport {
                    method: "two-comp",
                    kernel: None,
                    estimate: None,
                    asymptotic: None,
                    two_component: Some(&est),
                },
            )
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
