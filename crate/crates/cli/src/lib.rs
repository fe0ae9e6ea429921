//! Experiment harness for the heritability toolkit: declarative TOML
//! configurations, shipped presets, a deterministic replicate runner and
//! CSV/JSON reporting. The `herit` binary in this crate exposes the whole
//! pipeline (simulate / grm / estimate / truth / experiment) on the command
//! line.

pub mod config;
pub mod presets;
pub mod runner;
pub mod summary;
