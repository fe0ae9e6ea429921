//! Declarative experiment configuration: a TOML file describing the scale,
//! LD structure, genotype model, causal effects, estimators and replication
//! of one experiment. Unknown keys are rejected and every cross-reference is
//! validated at load time.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use herit_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub n: usize,
    pub m: usize,
    pub genotype_model: GenotypeModel,
    pub sigma_e2: f64,
    #[serde(default)]
    pub effect_regime: EffectRegime,
    pub ld: LdSpec,
    #[serde(default)]
    pub maf: Option<MafSpec>,
    #[serde(default)]
    pub effects: Vec<EffectGroup>,
    #[serde(default)]
    pub subsets: Vec<SubsetSpec>,
    #[serde(default)]
    pub projections: Vec<ProjectionFileSpec>,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenotypeModel {
    Gaussian,
    CopulaBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EffectRegime {
    /// Effects are redrawn inside every replicate.
    #[default]
    Redrawn,
    /// One effect vector is drawn at experiment level and reused.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LdSpec {
    #[serde(default)]
    pub ar_blocks: Option<ArBlocksSpec>,
    #[serde(default)]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArBlocksSpec {
    pub block_size: usize,
    pub rhos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MafSpec {
    #[serde(default)]
    pub sampled: Option<SampledMafSpec>,
    #[serde(default)]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SampledMafSpec {
    pub min_maf: f64,
    pub max_adjacent_diff: f64,
}

/// 1-based index region over the SNPs, resolved against m at load time.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    All,
    /// Inclusive 1-based range.
    Range { start: usize, end: usize },
    /// Indices congruent to `offset` modulo `step` (1-based offset).
    EveryNth { step: usize, offset: usize },
    /// Explicit 1-based indices.
    Indices { values: Vec<usize> },
    Union { parts: Vec<RegionSpec> },
    Complement { of: Box<RegionSpec> },
}

impl RegionSpec {
    /// Resolve to 0-based ascending indices.
    pub fn resolve(&self, m: usize) -> Result<Vec<usize>> {
        let set = self.resolve_set(m)?;
        let mut v: Vec<usize> = set.into_iter().collect();
        v.sort_unstable();
        Ok(v)
    }

    fn resolve_set(&self, m: usize) -> Result<HashSet<usize>> {
        match self {
            RegionSpec::All => Ok((0..m).collect()),
            RegionSpec::Range { start, end } => {
                if *start == 0 || start > end || *end > m {
                    return Err(Error::Invalid(format!(
                        "range {start}..={end} invalid for m = {m} (1-based, inclusive)"
                    )));
                }
                Ok((start - 1..*end).collect())
            }
            RegionSpec::EveryNth { step, offset } => {
                if *step == 0 || *offset == 0 || *offset > *step {
                    return Err(Error::Invalid(format!(
                        "every-nth needs 1 <= offset <= step; got step {step}, offset {offset}"
                    )));
                }
                Ok((offset - 1..m).step_by(*step).collect())
            }
            RegionSpec::Indices { values } => {
                let mut out = HashSet::new();
                for &v in values {
                    if v == 0 || v > m {
                        return Err(Error::Invalid(format!(
                            "index {v} out of range 1..={m}"
                        )));
                    }
                    out.insert(v - 1);
                }
                Ok(out)
            }
            RegionSpec::Union { parts } => {
                let mut out = HashSet::new();
                for p in parts {
                    out.extend(p.resolve_set(m)?);
                }
                Ok(out)
            }
            RegionSpec::Complement { of } => {
                let inner = of.resolve_set(m)?;
                Ok((0..m).filter(|j| !inner.contains(j)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EffectGroup {
    pub region: RegionSpec,
    pub sigma2: f64,
    pub variance_rule: VarianceRule,
    /// Optional: sample this many causal indices uniformly without
    /// replacement from the region instead of using all of it.
    #[serde(default)]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceRule {
    Equal,
    MafWeighted,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub name: String,
    pub region: RegionSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionFileSpec {
    pub name: String,
    /// CSV file with the m x k projection matrix.
    pub file: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Mle,
    He,
    Cmle,
    TwoComp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Euclidean,
    Mahalanobis,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub method: MethodKind,
    #[serde(default)]
    pub kernel: Option<KernelChoice>,
    #[serde(default)]
    pub subset: Option<String>,
    #[serde(default)]
    pub projection: Option<String>,
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self.method {
            MethodKind::Mle | MethodKind::He => {
                let k = match self.kernel {
                    Some(KernelChoice::Euclidean) => "euclidean",
                    Some(KernelChoice::Mahalanobis) => "mahalanobis",
                    None => "unset",
                };
                let m = if self.method == MethodKind::Mle { "mle" } else { "he" };
                format!("{m}-{k}")
            }
            MethodKind::Cmle => match (&self.subset, &self.projection) {
                (Some(s), _) => format!("cmle:{s}"),
                (None, Some(p)) => format!("cmle:{p}"),
                (None, None) => "cmle".to_string(),
            },
            MethodKind::TwoComp => {
                format!("two-comp:{}", self.subset.as_deref().unwrap_or("unset"))
            }
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate. `source` names the origin for error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            // toml errors carry line/column in their display
            let line = e
                .span()
                .map(|s| text[..s.start].lines().count())
                .unwrap_or(0);
            Error::Parse {
                path: source.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Structural validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Invalid("replicates must be >= 1".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Invalid("n and m must be >= 1".into()));
        }
        if !(self.sigma_e2 >= 0.0) {
            return Err(Error::Invalid(format!(
                "sigma_e2 must be >= 0; got {}",
                self.sigma_e2
            )));
        }
        match (&self.ld.ar_blocks, &self.ld.file) {
            (Some(ar), None) => {
                if ar.block_size * ar.rhos.len() != self.m {
                    return Err(Error::Invalid(format!(
                        "ld.ar_blocks implies m = {} but m = {}",
                        ar.block_size * ar.rhos.len(),
                        self.m
                    )));
                }
            }
            (None, Some(_)) => {}
            _ => {
                return Err(Error::Invalid(
                    "ld must specify exactly one of ar_blocks or file".into(),
                ))
            }
        }
        if let Some(maf) = &self.maf {
            match (&maf.sampled, &maf.file) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(Error::Invalid(
                        "maf must specify exactly one of sampled or file".into(),
                    ))
                }
            }
        }
        let needs_mafs = self.genotype_model == GenotypeModel::CopulaBinomial
            || self
                .effects
                .iter()
                .any(|g| g.variance_rule == VarianceRule::MafWeighted);
        if needs_mafs && self.maf.is_none() {
            return Err(Error::Invalid(
                "copula-binomial genotypes and maf-weighted effects require a [maf] section"
                    .into(),
            ));
        }
        for (i, g) in self.effects.iter().enumerate() {
            if !(g.sigma2 >= 0.0) {
                return Err(Error::Invalid(format!(
                    "effects[{i}].sigma2 must be >= 0"
                )));
            }
            let region = g.region.resolve(self.m)?;
            if let Some(k) = g.sample {
                if k > region.len() {
                    return Err(Error::Invalid(format!(
                        "effects[{i}] samples {k} from a region of {}",
                        region.len()
                    )));
                }
            }
            if region.is_empty() && g.sigma2 > 0.0 {
                return Err(Error::Invalid(format!(
                    "effects[{i}] region is empty but sigma2 > 0"
                )));
            }
        }
        let mut names = HashSet::new();
        for s in &self.subsets {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate subset name {}", s.name)));
            }
            let r = s.region.resolve(self.m)?;
            if r.is_empty() {
                return Err(Error::Invalid(format!("subset {} is empty", s.name)));
            }
        }
        for p in &self.projections {
            if !names.insert(p.name.as_str()) {
                return Err(Error::Invalid(format!(
                    "duplicate subset/projection name {}",
                    p.name
                )));
            }
        }
        for (i, e) in self.estimators.iter().enumerate() {
            match e.method {
                MethodKind::Mle | MethodKind::He => {
                    if e.kernel.is_none() {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: method {:?} requires a kernel",
                            e.method
                        )));
                    }
                    if e.subset.is_some() || e.projection.is_some() {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: subset/projection not applicable"
                        )));
                    }
                }
                MethodKind::Cmle => {
                    if e.kernel.is_some() {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: cmle does not take a kernel"
                        )));
                    }
                    if e.subset.is_some() && e.projection.is_some() {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: choose subset or projection, not both"
                        )));
                    }
                    if let Some(s) = &e.subset {
                        if !self.subsets.iter().any(|x| &x.name == s) {
                            return Err(Error::Invalid(format!(
                                "estimators[{i}]: unknown subset {s}"
                            )));
                        }
                    }
                    if let Some(p) = &e.projection {
                        if !self.projections.iter().any(|x| &x.name == p) {
                            return Err(Error::Invalid(format!(
                                "estimators[{i}]: unknown projection {p}"
                            )));
                        }
                    }
                }
                MethodKind::TwoComp => {
                    let s = e.subset.as_ref().ok_or_else(|| {
                        Error::Invalid(format!("estimators[{i}]: two-comp requires a subset"))
                    })?;
                    if !self.subsets.iter().any(|x| &x.name == s) {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: unknown subset {s}"
                        )));
                    }
                    if e.kernel.is_some() || e.projection.is_some() {
                        return Err(Error::Invalid(format!(
                            "estimators[{i}]: two-comp takes only a subset"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Validation used by the experiment runner (simulation-only use allows
    /// an empty estimator list).
    pub fn validate_for_experiment(&self) -> Result<()> {
        self.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::Invalid(
                "experiment requires at least one estimator".into(),
            ));
        }
        Ok(())
    }

    /// Stable content hash of the canonical serialized form.
    pub fn content_hash(&self) -> u64 {
        let canonical = toml::to_string(self).expect("config serializes");
        herit_core::stats::fnv1a64(canonical.as_bytes())
    }
}
