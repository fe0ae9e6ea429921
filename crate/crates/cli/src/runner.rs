//! End-to-end experiment execution: simulate -> estimate -> summarize, with
//! deterministic per-replicate RNG sub-streams so results are identical for
//! any thread count and any execution order.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use herit_core::estimators::{
    c_heritability_mle, he_regression, ml_two_component, mle_single_kernel, MleOptions,
    TwoComponentOptions,
};
use herit_core::kernels::{euclidean_grm, mahalanobis_grm, whitened_design};
use herit_core::model::{
    standardize, EffectVector, GenotypeMatrix, LDMatrix, MafVector, PhenotypeVector,
    ProjectionSpec,
};
use herit_core::sim::{
    build_block_ar_sigma, sample_mafs, simulate_effects, simulate_gaussian_genotypes,
    simulate_phenotype, ArBlockSpec, CausalConfig, CausalMode, CopulaModel, CopulaOptions,
    EffectVarianceRule, RngStream,
};
use herit_core::truth::{true_c_h2, true_h2_fixed, true_partitioned_h2};
use herit_core::{Error, Result};

use crate::config::{
    EffectRegime, EstimatorSpec, ExperimentConfig, GenotypeModel, KernelChoice, MethodKind,
    VarianceRule,
};
use crate::summary::{summarize, Summary};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Fraction of flagged rows (boundary hits or non-convergence) above which
/// an experiment is considered to have failed numerically.
pub const FLAG_FAILURE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub estimator: String,
    pub h2_hat: f64,
    pub truth_h2: f64,
    pub se: Option<f64>,
    pub eta2_hat: Option<f64>,
    pub sigma2_s: Option<f64>,
    pub sigma2_sc: Option<f64>,
    pub sigma2_e: f64,
    pub flags: Vec<String>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub metric: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub threads: usize,
    pub crate_version: String,
    pub copula_distortion: Option<f64>,
    pub copula_repaired_blocks: Option<usize>,
    pub flagged_fraction: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub rows: Vec<ReplicateRow>,
    pub summaries: Vec<SummaryRow>,
    pub manifest: Manifest,
}

impl ExperimentResult {
    /// True when more than 5% of rows carry a boundary or convergence flag.
    pub fn exceeds_flag_threshold(&self) -> bool {
        self.manifest.flagged_fraction > FLAG_FAILURE_THRESHOLD
    }
}

/// Everything derived once per experiment, shared read-only by replicates.
struct Prepared {
    sigma: LDMatrix,
    mafs: Option<MafVector>,
    copula: Option<CopulaModel>,
    subsets: Vec<(String, Vec<usize>)>,
    projections: Vec<(String, ProjectionSpec)>,
    fixed_effects: Option<EffectVector>,
    effect_groups: Vec<PreparedEffects>,
}

struct PreparedEffects {
    region: Vec<usize>,
    sample: Option<usize>,
    sigma2: f64,
    rule: EffectVarianceRule,
}

fn prepare(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<Prepared> {
    let resolve_path = |p: &str| -> std::path::PathBuf {
        let path = Path::new(p);
        match (path.is_absolute(), base_dir) {
            (false, Some(base)) => base.join(path),
            _ => path.to_path_buf(),
        }
    };

    let sigma = match (&config.ld.ar_blocks, &config.ld.file) {
        (Some(ar), None) => {
            build_block_ar_sigma(&ArBlockSpec::new(ar.block_size, ar.rhos.clone())?)?
        }
        (None, Some(file)) => {
            let ld = herit_core::io::read_ld_csv(&resolve_path(file))?;
            if ld.dim() != config.m {
                return Err(Error::DimensionMismatch {
                    context: "LD file vs configured m",
                    expected: config.m,
                    found: ld.dim(),
                });
            }
            ld
        }
        _ => unreachable!("validated"),
    };

    // experiment-level draws come from stream 0, in a fixed order:
    // MAF sampling first, then the fixed effect vector when requested
    let mut exp_rng = RngStream::experiment(config.seed).rng();
    let mafs = match &config.maf {
        None => None,
        Some(spec) => match (&spec.sampled, &spec.file) {
            (Some(s), None) => Some(sample_mafs(
                config.m,
                s.min_maf,
                s.max_adjacent_diff,
                &mut exp_rng,
            )?),
            (None, Some(f)) => {
                let v = herit_core::io::read_maf_file(&resolve_path(f))?;
                if v.len() != config.m {
                    return Err(Error::DimensionMismatch {
                        context: "MAF file vs configured m",
                        expected: config.m,
                        found: v.len(),
                    });
                }
                Some(v)
            }
            _ => unreachable!("validated"),
        },
    };

    let copula = match config.genotype_model {
        GenotypeModel::Gaussian => None,
        GenotypeModel::CopulaBinomial => {
            let mafs = mafs.as_ref().expect("validated");
            Some(CopulaModel::new(mafs, &sigma, &CopulaOptions::default())?)
        }
    };

    let mut subsets = Vec::new();
    for s in &config.subsets {
        subsets.push((s.name.clone(), s.region.resolve(config.m)?));
    }
    let mut projections = Vec::new();
    for p in &config.projections {
        let c = herit_core::io::read_matrix_csv(&resolve_path(&p.file))?;
        if c.nrows() != config.m {
            return Err(Error::DimensionMismatch {
                context: "projection file rows vs configured m",
                expected: config.m,
                found: c.nrows(),
            });
        }
        projections.push((p.name.clone(), ProjectionSpec::general(c)?));
    }

    let effect_groups: Vec<PreparedEffects> = config
        .effects
        .iter()
        .map(|g| {
            Ok(PreparedEffects {
                region: g.region.resolve(config.m)?,
                sample: g.sample,
                sigma2: g.sigma2,
                rule: match g.variance_rule {
                    VarianceRule::Equal => EffectVarianceRule::Equal,
                    VarianceRule::MafWeighted => EffectVarianceRule::MafWeighted,
                },
            })
        })
        .collect::<Result<_>>()?;

    let fixed_effects = match config.effect_regime {
        EffectRegime::Fixed => Some(draw_effects(
            &effect_groups,
            config.m,
            mafs.as_ref(),
            &mut exp_rng,
        )?),
        EffectRegime::Redrawn => None,
    };

    Ok(Prepared {
        sigma,
        mafs,
        copula,
        subsets,
        projections,
        fixed_effects,
        effect_groups,
    })
}

fn draw_effects(
    groups: &[PreparedEffects],
    m: usize,
    mafs: Option<&MafVector>,
    rng: &mut impl rand::Rng,
) -> Result<EffectVector> {
    let mut acc = EffectVector::zeros(m);
    for g in groups {
        let mode = match g.sample {
            Some(k) => CausalMode::UniformSample {
                size: k,
                from: g.region.clone(),
            },
            None => CausalMode::Region(g.region.clone()),
        };
        let cfg = CausalConfig {
            mode,
            variance_rule: g.rule,
        };
        let drawn = simulate_effects(&cfg, m, mafs, g.sigma2, rng)?;
        acc = acc.combine(&drawn)?;
    }
    Ok(acc)
}

/// Run one replicate. Draw order inside the replicate stream is fixed:
/// genotypes, then effects (redrawn regime), then phenotype noise.
fn run_replicate(
    config: &ExperimentConfig,
    prep: &Prepared,
    replicate: usize,
) -> Result<Vec<ReplicateRow>> {
    let mut rng = RngStream::replicate(config.seed, replicate as u64).rng();

    let z: GenotypeMatrix = match config.genotype_model {
        GenotypeModel::Gaussian => simulate_gaussian_genotypes(config.n, &prep.sigma, &mut rng),
        GenotypeModel::CopulaBinomial => {
            let raw = prep.copula.as_ref().unwrap().sample(config.n, &mut rng);
            standardize(&raw, prep.mafs.as_ref().unwrap())?
        }
    };
    let u = match &prep.fixed_effects {
        Some(f) => f.clone(),
        None => draw_effects(&prep.effect_groups, config.m, prep.mafs.as_ref(), &mut rng)?,
    };
    let y = simulate_phenotype(&z, &u, config.sigma_e2, &mut rng)?;

    let truth_total = true_h2_fixed(&u, &prep.sigma, config.sigma_e2)?;
    let mut subset_truth = Vec::with_capacity(prep.subsets.len());
    for (name, s) in &prep.subsets {
        subset_truth.push((
            name.clone(),
            true_partitioned_h2(&u, &prep.sigma, s, config.sigma_e2)?,
        ));
    }
    let mut projection_truth = Vec::with_capacity(prep.projections.len());
    for (name, spec) in &prep.projections {
        projection_truth.push((
            name.clone(),
            true_c_h2(&u, &prep.sigma, spec, config.sigma_e2)?,
        ));
    }

    let mut rows = Vec::with_capacity(config.estimators.len());
    for est in &config.estimators {
        rows.push(run_estimator(
            est,
            config,
            prep,
            replicate,
            &z,
            &y,
            truth_total,
            &subset_truth,
            &projection_truth,
        )?);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_estimator(
    spec: &EstimatorSpec,
    config: &ExperimentConfig,
    prep: &Prepared,
    replicate: usize,
    z: &GenotypeMatrix,
    y: &PhenotypeVector,
    truth_total: f64,
    subset_truth: &[(String, f64)],
    projection_truth: &[(String, f64)],
) -> Result<ReplicateRow> {
    let label = spec.label();
    let lookup = |name: &str, table: &[(String, f64)]| -> f64 {
        table
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .expect("validated reference")
    };
    let mle_opts = MleOptions::default();
    match spec.method {
        MethodKind::Mle | MethodKind::He => {
            let kernel = match spec.kernel.expect("validated") {
                KernelChoice::Euclidean => euclidean_grm(z),
                KernelChoice::Mahalanobis => mahalanobis_grm(z, &prep.sigma)?,
            };
            let est = if spec.method == MethodKind::Mle {
                mle_single_kernel(y, &kernel, &mle_opts)?
            } else {
                he_regression(y, &kernel)?
            };
            Ok(estimate_row(replicate, label, est, truth_total))
        }
        MethodKind::Cmle => {
            let projection = match (&spec.subset, &spec.projection) {
                (Some(s), _) => {
                    let idx = &prep.subsets.iter().find(|(n, _)| n == s).unwrap().1;
                    ProjectionSpec::subset(idx.clone(), config.m)?
                }
                (None, Some(p)) => prep
                    .projections
                    .iter()
                    .find(|(n, _)| n == p)
                    .unwrap()
                    .1
                    .clone(),
                (None, None) => ProjectionSpec::Identity,
            };
            let truth = match (&spec.subset, &spec.projection) {
                (Some(s), _) => lookup(s, subset_truth),
                (None, Some(p)) => lookup(p, projection_truth),
                (None, None) => truth_total,
            };
            let w = whitened_design(z, &prep.sigma, &projection)?;
            let est = c_heritability_mle(y, &w, &mle_opts)?;
            Ok(estimate_row(replicate, label, est, truth))
        }
        MethodKind::TwoComp => {
            let name = spec.subset.as_ref().expect("validated");
            let s = &prep.subsets.iter().find(|(n, _)| n == name).unwrap().1;
            let truth = lookup(name, subset_truth);
            let est = ml_two_component(y, z, s, &TwoComponentOptions::default())?;
            let mut flags = Vec::new();
            if !est.converged {
                flags.push("non-converged".to_string());
            }
            for (pinned, tag) in [
                (est.pinned_s, "pinned-s"),
                (est.pinned_sc, "pinned-sc"),
                (est.pinned_e, "pinned-e"),
            ] {
                if pinned {
                    flags.push(tag.to_string());
                }
            }
            Ok(ReplicateRow {
                replicate,
                estimator: label,
                h2_hat: est.h2_s,
                truth_h2: truth,
                se: None,
                eta2_hat: None,
                sigma2_s: Some(est.sigma2_s),
                sigma2_sc: Some(est.sigma2_sc),
                sigma2_e: est.sigma2_e,
                flags,
                iterations: est.iterations,
                log_likelihood: est.log_likelihood,
            })
        }
    }
}

fn estimate_row(
    replicate: usize,
    estimator: String,
    est: herit_core::model::HeritabilityEstimate,
    truth: f64,
) -> ReplicateRow {
    let mut flags = Vec::new();
    if est.boundary_flag {
        flags.push("boundary".to_string());
    }
    if est.range_flag {
        flags.push("range".to_string());
    }
    if est.kn_ratio_flag {
        flags.push("kn-ratio".to_string());
    }
    ReplicateRow {
        replicate,
        estimator,
        h2_hat: est.h2_hat,
        truth_h2: truth,
        se: est.se,
        eta2_hat: Some(est.eta2_hat),
        sigma2_s: None,
        sigma2_sc: None,
        sigma2_e: est.sigma2_hat,
        flags,
        iterations: est.iterations,
        log_likelihood: est.log_likelihood,
    }
}

/// Execute every replicate (in a worker pool when `threads > 1`), collect
/// ordered rows and summaries. A failing replicate aborts with its id in
/// the error context; estimator non-convergence is a per-row flag instead.
pub fn run_experiment(
    config: &ExperimentConfig,
    base_dir: Option<&Path>,
    threads: usize,
) -> Result<ExperimentResult> {
    config.validate_for_experiment()?;
    let start = Instant::now();
    let prep = prepare(config, base_dir)?;

    let run_one = |r: usize| -> Result<Vec<ReplicateRow>> {
        run_replicate(config, &prep, r).map_err(|e| {
            Error::Invalid(format!("replicate {r} failed: {e}"))
        })
    };

    let per_replicate: Vec<Vec<ReplicateRow>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..config.replicates)
                .into_par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        (0..config.replicates)
            .map(run_one)
            .collect::<Result<Vec<_>>>()?
    };
    let rows: Vec<ReplicateRow> = per_replicate.into_iter().flatten().collect();

    // only flags that signal a failed fit count toward the abort threshold;
    // kn-ratio, range excursions and pinned-at-zero components are
    // informational
    let flagged = rows
        .iter()
        .filter(|r| r.flags.iter().any(|f| f == "boundary" || f == "non-converged"))
        .count();
    let flagged_fraction = flagged as f64 / rows.len() as f64;

    let summaries = summarize_rows(config, &rows)?;
    let manifest = Manifest {
        schema_version: CSV_SCHEMA_VERSION,
        name: config.name.clone(),
        config_hash: format!("{:016x}", config.content_hash()),
        seed: config.seed,
        n: config.n,
        m: config.m,
        replicates: config.replicates,
        threads,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        copula_distortion: prep.copula.as_ref().map(|c| c.distortion()),
        copula_repaired_blocks: prep.copula.as_ref().map(|c| c.repaired_blocks()),
        flagged_fraction,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentResult {
        rows,
        summaries,
        manifest,
    })
}

fn summarize_rows(config: &ExperimentConfig, rows: &[ReplicateRow]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for est in &config.estimators {
        let label = est.label();
        let of: Vec<&ReplicateRow> = rows.iter().filter(|r| r.estimator == label).collect();
        let columns: Vec<(&str, Vec<f64>)> = vec![
            ("h2_hat", of.iter().map(|r| r.h2_hat).collect()),
            ("truth_h2", of.iter().map(|r| r.truth_h2).collect()),
            (
                "bias",
                of.iter().map(|r| r.h2_hat - r.truth_h2).collect(),
            ),
            ("sigma2_e", of.iter().map(|r| r.sigma2_e).collect()),
        ];
        for (metric, values) in columns {
            out.push(SummaryRow {
                estimator: label.clone(),
                metric: metric.to_string(),
                summary: summarize(&values)?,
            });
        }
        for (metric, get) in [
            ("se", |r: &&ReplicateRow| r.se),
            ("sigma2_s", |r: &&ReplicateRow| r.sigma2_s),
            ("sigma2_sc", |r: &&ReplicateRow| r.sigma2_sc),
        ] as [(&str, fn(&&ReplicateRow) -> Option<f64>); 3]
        {
            let values: Vec<f64> = of.iter().filter_map(get).collect();
            if values.len() == of.len() {
                out.push(SummaryRow {
                    estimator: label.clone(),
                    metric: metric.to_string(),
                    summary: summarize(&values)?,
                });
            }
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Serialize replicate rows to CSV bytes deterministically (shortest
/// round-trip float formatting, fixed column order).
pub fn replicates_csv(rows: &[ReplicateRow]) -> String {
    let mut out = String::from(
        "replicate,estimator,h2_hat,truth_h2,bias,se,eta2_hat,sigma2_s,sigma2_sc,sigma2_e,flags,iterations,log_likelihood\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.replicate,
            r.estimator,
            r.h2_hat,
            r.truth_h2,
            r.h2_hat - r.truth_h2,
            fmt_opt(r.se),
            fmt_opt(r.eta2_hat),
            fmt_opt(r.sigma2_s),
            fmt_opt(r.sigma2_sc),
            r.sigma2_e,
            r.flags.join(";"),
            r.iterations,
            r.log_likelihood,
        ));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("estimator,metric,count,mean,sd,ci_lo,ci_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.estimator,
            r.metric,
            r.summary.count,
            r.summary.mean,
            r.summary.sd,
            r.summary.ci_lo,
            r.summary.ci_hi,
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationManifest {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    /// "raw-counts" for copula-binomial output, "standardized" for Gaussian.
    pub genotype_encoding: String,
    pub copula_distortion: Option<f64>,
    pub copula_repaired_blocks: Option<usize>,
}

/// Write simulated datasets to disk: one `rep****` directory per replicate
/// holding genotypes.csv, phenotypes.txt and effects.csv, plus mafs.txt and
/// manifest.json at the top level. Replicate r reproduces exactly the data
/// the experiment runner would feed its estimators.
pub fn run_simulation(
    config: &ExperimentConfig,
    base_dir: Option<&Path>,
    out: &Path,
) -> Result<SimulationManifest> {
    config.validate()?;
    let prep = prepare(config, base_dir)?;
    let io_err = |path: &Path, e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    if let Some(mafs) = &prep.mafs {
        herit_core::io::write_vector(&out.join("mafs.txt"), mafs.as_slice())?;
    }
    for r in 0..config.replicates {
        let mut rng = RngStream::replicate(config.seed, r as u64).rng();
        let dir = out.join(format!("rep{r:04}"));
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let z = match config.genotype_model {
            GenotypeModel::Gaussian => {
                let z = simulate_gaussian_genotypes(config.n, &prep.sigma, &mut rng);
                herit_core::io::write_matrix_csv(&dir.join("genotypes.csv"), z.z())?;
                z
            }
            GenotypeModel::CopulaBinomial => {
                let raw = prep.copula.as_ref().unwrap().sample(config.n, &mut rng);
                herit_core::io::write_raw_genotypes_csv(&dir.join("genotypes.csv"), &raw)?;
                standardize(&raw, prep.mafs.as_ref().unwrap())?
            }
        };
        let u = match &prep.fixed_effects {
            Some(f) => f.clone(),
            None => draw_effects(&prep.effect_groups, config.m, prep.mafs.as_ref(), &mut rng)?,
        };
        let y = simulate_phenotype(&z, &u, config.sigma_e2, &mut rng)?;
        herit_core::io::write_effects_csv(&dir.join("effects.csv"), &u)?;
        herit_core::io::write_vector(&dir.join("phenotypes.txt"), y.as_vector().as_slice())?;
    }
    let manifest = SimulationManifest {
        schema_version: CSV_SCHEMA_VERSION,
        name: config.name.clone(),
        config_hash: format!("{:016x}", config.content_hash()),
        seed: config.seed,
        n: config.n,
        m: config.m,
        replicates: config.replicates,
        genotype_encoding: match config.genotype_model {
            GenotypeModel::Gaussian => "standardized".to_string(),
            GenotypeModel::CopulaBinomial => "raw-counts".to_string(),
        },
        copula_distortion: prep.copula.as_ref().map(|c| c.distortion()),
        copula_repaired_blocks: prep.copula.as_ref().map(|c| c.repaired_blocks()),
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Write replicates.csv, summary.csv and manifest.json into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        f.write_all(contents.as_bytes()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    };
    write("replicates.csv", &replicates_csv(&result.rows))?;
    write("summary.csv", &summary_csv(&result.summaries))?;
    let manifest =
        serde_json::to_string_pretty(&result.manifest).expect("manifest serializes") + "\n";
    write("manifest.json", &manifest)
}
