//! Heritability estimation for GWAS-style linear models.
//!
//! The crate provides:
//!
//! - domain types for MAFs, LD matrices, genotypes, phenotypes, effect
//!   vectors and kernels ([`model`]);
//! - genetic relationship matrices (Euclidean and Mahalanobis) and the
//!   whitened designs behind projection ("C"-) heritability ([`kernels`]);
//! - maximum-likelihood, Haseman-Elston and two-variance-component
//!   estimators with asymptotic standard errors ([`estimators`]);
//! - ground-truth heritability calculators for the fixed-effects model
//!   ([`truth`]);
//! - a seeded simulation toolkit for LD matrices, Gaussian and
//!   copula-binomial genotypes, causal effects and phenotypes ([`sim`]);
//! - plain-text/CSV readers and writers for the file formats the CLI
//!   speaks ([`io`]).
//!
//! All numerics are f64. Types are immutable after construction and safe to
//! share across threads.

pub mod error;
pub mod estimators;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod stats;
pub mod truth;

mod optim;

pub use error::{Error, Result};
