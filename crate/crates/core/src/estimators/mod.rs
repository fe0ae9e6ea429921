//! Heritability estimators: single-kernel Gaussian maximum likelihood,
//! Haseman-Elston moment regression, the whitened-design (projection)
//! maximum likelihood with its asymptotic standard error, and the
//! two-variance-component maximum likelihood comparator.

mod cache;
mod he;
mod mle;
mod se;
mod two_component;

pub use cache::ProfileLikelihoodCache;
pub use he::he_regression;
pub use mle::{c_heritability_mle, mle_single_kernel, MleOptions};
pub use se::{asymptotic_se, AsymptoticVariance};
pub use two_component::{ml_two_component, TwoComponentOptions};
