//! Shared domain types: MAF vectors, LD matrices, genotype and phenotype
//! containers, effect vectors, kernels, projections, and estimate records.
//!
//! Every type here is immutable after construction and safe to share across
//! threads; factorizations are computed eagerly when a type is built.

mod effects;
mod estimate;
mod genotype;
mod kernel;
mod ld;
mod maf;
mod phenotype;
mod projection;

pub use effects::EffectVector;
pub use estimate::{HeritabilityEstimate, TwoComponentEstimate};
pub use genotype::{
    standardize, standardize_with_sample_mafs, GenotypeMatrix, RawGenotypeMatrix,
};
pub use kernel::{KernelKind, KernelMatrix};
pub use ld::LDMatrix;
pub use maf::MafVector;
pub use phenotype::{center, PhenotypeVector};
pub use projection::ProjectionSpec;
