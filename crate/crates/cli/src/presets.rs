//! Built-in experiment presets. Reduced-scale variants run in minutes on a
//! laptop; the `.full` variants restore the m = 10^4 scale for overnight
//! runs and are selected with `--full-scale`.

use herit_core::{Error, Result};

use crate::config::ExperimentConfig;

macro_rules! presets {
    ($(($name:literal, $reduced:literal, $full:literal)),+ $(,)?) => {
        pub const PRESET_NAMES: &[&str] = &[$($name),+];

        fn preset_text(name: &str, full_scale: bool) -> Option<&'static str> {
            match (name, full_scale) {
                $(
                    ($name, false) => Some(include_str!($reduced)),
                    ($name, true) => Some(include_str!($full)),
                )+
                _ => None,
            }
        }
    };
}

presets![
    ("table1", "../presets/table1.toml", "../presets/table1.full.toml"),
    ("fig1-average", "../presets/fig1-average.toml", "../presets/fig1-average.full.toml"),
    ("fig1-high", "../presets/fig1-high.toml", "../presets/fig1-high.full.toml"),
    ("fig1-low", "../presets/fig1-low.toml", "../presets/fig1-low.full.toml"),
    ("fig3-s01", "../presets/fig3-s01.toml", "../presets/fig3-s01.full.toml"),
    ("fig3-s03", "../presets/fig3-s03.toml", "../presets/fig3-s03.full.toml"),
    ("fig3-s05", "../presets/fig3-s05.toml", "../presets/fig3-s05.full.toml"),
    ("table2-average", "../presets/table2-average.toml", "../presets/table2-average.full.toml"),
    ("table2-high", "../presets/table2-high.toml", "../presets/table2-high.full.toml"),
    ("table2-low", "../presets/table2-low.toml", "../presets/table2-low.full.toml"),
];

/// Parse a shipped preset by name.
pub fn preset(name: &str, full_scale: bool) -> Result<ExperimentConfig> {
    let text = preset_text(name, full_scale).ok_or_else(|| {
        Error::Invalid(format!(
            "unknown preset {name:?}; available: {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    ExperimentConfig::parse(text, &format!("preset:{name}"))
}

/// Raw TOML text of a preset, for `presets --dump`.
pub fn preset_source(name: &str, full_scale: bool) -> Option<&'static str> {
    preset_text(name, full_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GenotypeModel, KernelChoice, MethodKind};

    #[test]
    fn all_presets_parse_and_validate() {
        for &name in PRESET_NAMES {
            for full in [false, true] {
                let cfg = preset(name, full).unwrap_or_else(|e| {
                    panic!("preset {name} (full={full}) failed: {e}")
                });
                cfg.validate_for_experiment()
                    .unwrap_or_else(|e| panic!("preset {name}: {e}"));
            }
        }
        assert!(preset("nope", false).is_err());
    }

    #[test]
    fn table1_documented_settings() {
        let cfg = preset("table1", false).unwrap();
        assert_eq!(cfg.n, 500);
        assert_eq!(cfg.m, 1000);
        assert_eq!(cfg.replicates, 50);
        assert_eq!(cfg.genotype_model, GenotypeModel::Gaussian);
        assert_eq!(cfg.sigma_e2, 0.5);
        let ar = cfg.ld.ar_blocks.as_ref().unwrap();
        assert_eq!(ar.block_size, 500);
        assert_eq!(ar.rhos, vec![0.3, 0.7]);
        assert_eq!(cfg.effects.len(), 1);
        assert_eq!(cfg.effects[0].sigma2, 0.5);
        assert_eq!(cfg.effects[0].region.resolve(1000).unwrap().len(), 500);
        assert_eq!(cfg.estimators.len(), 2);
        assert_eq!(cfg.estimators[0].method, MethodKind::Mle);
        assert_eq!(cfg.estimators[0].kernel, Some(KernelChoice::Euclidean));
        assert_eq!(cfg.estimators[1].kernel, Some(KernelChoice::Mahalanobis));
    }

    #[test]
    fn full_scale_restores_large_m() {
        let cfg = preset("fig1-high", true).unwrap();
        assert_eq!(cfg.m, 10_000);
        assert_eq!(cfg.n, 1000);
        let reduced = preset("fig1-high", false).unwrap();
        assert_eq!(reduced.m, 2000);
    }
}
