//! Seeded simulation of LD matrices, genotypes (Gaussian and
//! copula-binomial), causal effect vectors and phenotypes.
//!
//! Every simulator is a pure function of its inputs and the supplied RNG;
//! replicate-level parallelism is the intended mode, with one derived
//! [`RngStream`] per replicate.

mod ar;
mod copula;
mod effects;
mod gaussian;
mod mafs;
mod phenotype;
mod rng;

pub use ar::{build_block_ar_sigma, ArBlockSpec};
pub use copula::{
    copula_intermediate_correlation, simulate_binomial_genotypes, CopulaModel, CopulaOptions,
};
pub use effects::{simulate_effects, CausalConfig, CausalMode, EffectVarianceRule};
pub use gaussian::simulate_gaussian_genotypes;
pub use mafs::sample_mafs;
pub use phenotype::simulate_phenotype;
pub use rng::RngStream;
