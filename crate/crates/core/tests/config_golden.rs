//! The shipped configs parse to frozen snapshots.

use std::path::Path;

use bioconv_core::config::{
    load_config, parse_config, AlphasSection, ConsumptionSection, ConstantsSection,
    DomainSection, ForceSource, GridSection, OutputSection, ParamsSection, RunConfig,
    ScalarSource, SolverSection, SourcesSection, DimensionlessBlock,
};
use bioconv_core::certificate::ConstantsMode;
use bioconv_core::OxygenTopBc;

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn certified_small_matches_golden_snapshot() {
    let parsed = load_config(&config_path("certified-small.toml")).unwrap();
    let golden = RunConfig {
        domain: DomainSection {
            edges: [1.0, 1.0, 1.0],
        },
        grid: GridSection { cells: [16, 16, 16] },
        params: ParamsSection {
            physical: None,
            dimensionless: Some(DimensionlessBlock {
                s_c: 1.0,
                gamma: 0.1,
                chi: 0.05,
                delta: 1.0,
                beta: 0.05,
                g: 1.0,
            }),
        },
        consumption: ConsumptionSection::Bump {
            c_star: 0.3,
            width: 0.1,
        },
        alphas: AlphasSection {
            alpha1: 0.5,
            alpha2: 0.2,
        },
        sources: SourcesSection {
            f_n: ScalarSource::Cosine {
                amplitude: 0.02,
                mode: [1, 0, 1],
            },
            f_c: ScalarSource::Cosine {
                amplitude: 0.02,
                mode: [0, 1, 1],
            },
            force: ForceSource::Zero,
        },
        constants: ConstantsSection {
            mode: ConstantsMode::Analytic,
            discrete_grid: None,
            c_poi_dirichlet: None,
            c_poi_meanzero: None,
            c_tr: Some(0.05),
            c_1: None,
        },
        solver: SolverSection {
            tolerance: 1e-11,
            max_outer: 60,
            damping: 1.0,
            linear_tolerance: 1e-12,
            oxygen_top_bc: OxygenTopBc::Neumann,
            strict_certificate: false,
        },
        output: OutputSection {
            directory: "out/certified-small".into(),
        },
    };
    assert_eq!(parsed, golden);
}

#[test]
fn config_reserializes_and_reparses_identically() {
    let parsed = load_config(&config_path("certified-small.toml")).unwrap();
    let text = toml::to_string(&parsed).unwrap();
    let back = parse_config(&text).unwrap();
    assert_eq!(parsed, back);
}

#[test]
fn all_shipped_configs_parse() {
    for name in [
        "certified-small.toml",
        "trace-violation.toml",
        "zero-data.toml",
        "water-physical.toml",
    ] {
        load_config(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
