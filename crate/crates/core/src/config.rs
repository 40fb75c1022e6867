//! Run configuration: a strict TOML grammar (unknown keys rejected) that
//! fully describes a certify/solve run. See `docs/formats.md` for the
//! documented grammar and defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::assemble::OxygenTopBc;
use crate::certificate::{
    domain_constants, Certificate, CertificateInputs, ConstantMethod, ConstantsMode,
    DomainConstants, TaggedConstant,
};
use crate::error::{Error, Result};
use crate::grid::{MacGrid, ScalarField, VectorField};
use crate::model::{
    dimensionless_from_physical, ChamberDomain, ConsumptionFunction, DimensionlessGroups,
    PhysicalParams, SourceData,
};
use crate::solver::{PicardOptions, ProblemData};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub edges: [f64; 3],
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells: [usize; 3],
}

/// Dimensionless parameter block; bypasses the physical constants entirely.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DimensionlessBlock {
    pub s_c: f64,
    pub gamma: f64,
    pub chi: f64,
    pub delta: f64,
    pub beta: f64,
    /// gravitational acceleration of the dimensionless system
    pub g: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensionless: Option<DimensionlessBlock>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ConsumptionSection {
    /// smooth compactly supported plateau profile
    Bump { c_star: f64, width: f64 },
}

impl Default for ConsumptionSection {
    fn default() -> Self {
        ConsumptionSection::Bump {
            c_star: 1.0,
            width: 0.25,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlphasSection {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for AlphasSection {
    fn default() -> Self {
        AlphasSection {
            alpha1: 0.5,
            alpha2: 0.5,
        }
    }
}

/// Named scalar source: zero, or a product of cosine modes
/// `amplitude * prod_i cos(k_i pi x_i / L_i)` (zero-mean whenever any
/// mode index is nonzero, and Neumann-compatible at all walls).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ScalarSource {
    Zero,
    Cosine { amplitude: f64, mode: [u32; 3] },
}

impl Default for ScalarSource {
    fn default() -> Self {
        ScalarSource::Zero
    }
}

/// External force: zero, or a single-component cosine profile.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ForceSource {
    Zero,
    Cosine {
        amplitude: f64,
        component: usize,
        mode: [u32; 3],
    },
}

impl Default for ForceSource {
    fn default() -> Self {
        ForceSource::Zero
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SourcesSection {
    #[serde(default)]
    pub f_n: ScalarSource,
    #[serde(default)]
    pub f_c: ScalarSource,
    #[serde(default)]
    pub force: ForceSource,
}

/// Domain-constant estimation mode plus optional per-constant overrides.
/// Overrides exist because the honest trace constant of a box is never
/// below one, so the strict trace hypothesis is only satisfiable for
/// pinned constants; every override is tagged as such in the certificate.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    #[serde(default = "default_mode")]
    pub mode: ConstantsMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_poi_dirichlet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_poi_meanzero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_tr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_1: Option<f64>,
}

fn default_mode() -> ConstantsMode {
    ConstantsMode::Analytic
}

impl Default for ConstantsSection {
    fn default() -> Self {
        ConstantsSection {
            mode: ConstantsMode::Analytic,
            discrete_grid: None,
            c_poi_dirichlet: None,
            c_poi_meanzero: None,
            c_tr: None,
            c_1: None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_linear_tol")]
    pub linear_tolerance: f64,
    #[serde(default = "default_oxygen_top")]
    pub oxygen_top_bc: OxygenTopBc,
    #[serde(default)]
    pub strict_certificate: bool,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_outer() -> usize {
    60
}
fn default_damping() -> f64 {
    1.0
}
fn default_linear_tol() -> f64 {
    1e-12
}
fn default_oxygen_top() -> OxygenTopBc {
    OxygenTopBc::Neumann
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tolerance: default_tol(),
            max_outer: default_max_outer(),
            damping: default_damping(),
            linear_tolerance: default_linear_tol(),
            oxygen_top_bc: default_oxygen_top(),
            strict_certificate: false,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub directory: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_output_dir(),
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub grid: GridSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub consumption: ConsumptionSection,
    #[serde(default)]
    pub alphas: AlphasSection,
    #[serde(default)]
    pub sources: SourcesSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parses and semantically validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    match (&cfg.params.physical, &cfg.params.dimensionless) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "params: exactly one of `physical` and `dimensionless` must be present, found both"
                    .to_string(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "params: exactly one of `physical` and `dimensionless` must be present, found neither"
                    .to_string(),
            ))
        }
        _ => {}
    }
    if let ForceSource::Cosine { component, .. } = cfg.sources.force {
        if component > 2 {
            return Err(Error::Config(format!(
                "sources.force.component must be 0, 1 or 2, got {component}"
            )));
        }
    }
    if !(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0) {
        return Err(Error::Config(format!(
            "solver.damping must lie in (0, 1], got {}",
            cfg.solver.damping
        )));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn sample_scalar_source(
    grid: &Arc<MacGrid>,
    dom: &ChamberDomain,
    src: &ScalarSource,
) -> ScalarField {
    match src {
        ScalarSource::Zero => ScalarField::zeros(grid),
        ScalarSource::Cosine { amplitude, mode } => {
            let m = *mode;
            let l = dom.edges;
            let a = *amplitude;
            ScalarField::from_fn(grid, move |p| {
                a * (0..3)
                    .map(|d| (m[d] as f64 * std::f64::consts::PI * p[d] / l[d]).cos())
                    .product::<f64>()
            })
        }
    }
}

fn sample_force(grid: &Arc<MacGrid>, dom: &ChamberDomain, src: &ForceSource) -> VectorField {
    match src {
        ForceSource::Zero => VectorField::zeros(grid),
        ForceSource::Cosine {
            amplitude,
            component,
            mode,
        } => {
            let m = *mode;
            let l = dom.edges;
            let a = *amplitude;
            let comp = *component;
            VectorField::from_fn(grid, move |d, p| {
                if d != comp {
                    return 0.0;
                }
                a * (0..3)
                    .map(|e| (m[e] as f64 * std::f64::consts::PI * p[e] / l[e]).cos())
                    .product::<f64>()
            })
        }
    }
}

/// A fully materialized run: problem data, resolved constants, certificate.
pub struct BuiltRun {
    pub config: RunConfig,
    pub dom: ChamberDomain,
    pub problem: ProblemData,
    pub constants: DomainConstants,
    pub certificate: Certificate,
    pub picard: PicardOptions,
}

/// Resolves a parsed configuration into solvable problem data plus the
/// evaluated certificate. `project_fn` subtracts the discrete mean of the
/// bacteria source instead of rejecting a nonzero one.
pub fn build_run(cfg: &RunConfig, project_fn: bool) -> Result<BuiltRun> {
    let dom = ChamberDomain::new(cfg.domain.edges)?;
    let grid = MacGrid::new(cfg.domain.edges, cfg.grid.cells)?;
    let (groups, g_accel) = match (&cfg.params.physical, &cfg.params.dimensionless) {
        (Some(p), None) => (dimensionless_from_physical(p)?, p.g),
        (None, Some(d)) => {
            let groups = DimensionlessGroups {
                s_c: d.s_c,
                gamma: d.gamma,
                chi: d.chi,
                delta: d.delta,
                beta: d.beta,
            };
            groups.validate()?;
            if !(d.g > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "g",
                    value: d.g,
                    reason: "must be strictly positive",
                });
            }
            (groups, d.g)
        }
        _ => unreachable!("parse_config enforces exactly one block"),
    };
    let r = match cfg.consumption {
        ConsumptionSection::Bump { c_star, width } => ConsumptionFunction::bump(c_star, width)?,
    };
    let f_n = sample_scalar_source(&grid, &dom, &cfg.sources.f_n);
    let f_c = sample_scalar_source(&grid, &dom, &cfg.sources.f_c);
    let force = sample_force(&grid, &dom, &cfg.sources.force);
    let sources = SourceData::new(
        f_n,
        f_c,
        force,
        cfg.alphas.alpha1,
        cfg.alphas.alpha2,
        project_fn,
    )?;

    let mut constants = domain_constants(&dom, cfg.constants.mode, cfg.constants.discrete_grid)?;
    let over = |slot: &mut TaggedConstant, v: Option<f64>| {
        if let Some(value) = v {
            *slot = TaggedConstant {
                value,
                method: ConstantMethod::Override,
            };
        }
    };
    over(&mut constants.c_poi_dirichlet, cfg.constants.c_poi_dirichlet);
    over(&mut constants.c_poi_meanzero, cfg.constants.c_poi_meanzero);
    over(&mut constants.c_tr, cfg.constants.c_tr);
    over(&mut constants.c_1, cfg.constants.c_1);
    constants.validate()?;

    let inputs = CertificateInputs::assemble(
        &constants,
        &dom,
        &groups,
        g_accel,
        &r,
        sources.alpha1,
        sources.f_n.l2(),
        sources.f_c.l2(),
        sources.force.l2(),
    );
    let certificate = Certificate::evaluate(&constants, &inputs)?;

    let picard = PicardOptions {
        tol: cfg.solver.tolerance,
        max_outer: cfg.solver.max_outer,
        damping: cfg.solver.damping,
        linear_tol: cfg.solver.linear_tolerance,
        linear_max: 60_000,
    };
    Ok(BuiltRun {
        config: cfg.clone(),
        dom,
        problem: ProblemData {
            grid,
            groups,
            g_accel,
            r,
            sources,
            oxygen_top: cfg.solver.oxygen_top_bc,
        },
        constants,
        certificate,
        picard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
edges = [1.0, 1.0, 1.0]

[grid]
cells = [8, 8, 8]

[params.dimensionless]
s_c = 1.0
gamma = 0.1
chi = 0.05
delta = 1.0
beta = 0.05
g = 1.0
"#;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver.tolerance, 1e-10);
        assert_eq!(cfg.solver.max_outer, 60);
        assert_eq!(cfg.solver.damping, 1.0);
        assert_eq!(cfg.solver.oxygen_top_bc, OxygenTopBc::Neumann);
        assert!(!cfg.solver.strict_certificate);
        assert_eq!(cfg.alphas.alpha1, 0.5);
        assert_eq!(cfg.sources.f_n, ScalarSource::Zero);
        assert_eq!(cfg.output.directory, PathBuf::from("out"));
        assert_eq!(
            cfg.consumption,
            ConsumptionSection::Bump {
                c_star: 1.0,
                width: 0.25
            }
        );
    }

    #[test]
    fn both_parameter_blocks_rejected() {
        let text = format!(
            "{MINIMAL}\n[params.physical]\neta = 1.0\nd_n = 1.0\nd_c = 1.0\nrho = 1.0\nrho_b = 2.0\nv_b = 1.0\nn_r = 1.0\nl = 1.0\nchi_bar = 1.0\nc_air = 1.0\nk = 1.0\ng = 9.81\n"
        );
        match parse_config(&text) {
            Err(Error::Config(msg)) => assert!(msg.contains("both"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn neither_parameter_block_rejected() {
        let text = "[domain]\nedges = [1.0,1.0,1.0]\n[grid]\ncells = [8,8,8]\n[params]\n";
        match parse_config(text) {
            Err(Error::Config(msg)) => assert!(msg.contains("neither"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let text = format!("{MINIMAL}\n[solver]\ntollerance = 1e-8\n");
        match parse_config(&text) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("tollerance"), "{msg}");
                assert!(msg.contains("line"), "syntax errors carry locations: {msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_line_number() {
        let text = "[domain\nedges = [1.0]";
        match parse_config(text) {
            Err(Error::Config(msg)) => assert!(msg.contains("line 1"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn physical_block_produces_groups() {
        let text = r#"
[domain]
edges = [1.0, 1.0, 1.0]

[grid]
cells = [8, 8, 8]

[params.physical]
eta = 1.0e-3
d_n = 1.0e-9
d_c = 2.0e-9
rho = 1.0e3
rho_b = 1.1e3
v_b = 1.0e-18
n_r = 1.0e14
l = 1.0e-3
chi_bar = 1.0e-10
c_air = 1.0e-1
k = 1.0e-3
g = 9.81
"#;
        let cfg = parse_config(text).unwrap();
        let run = build_run(&cfg, false).unwrap();
        assert!((run.problem.groups.delta - 2.0).abs() < 1e-14);
        assert!((run.problem.groups.s_c - 1e3).abs() / 1e3 < 1e-14);
    }

    #[test]
    fn dimensionless_block_bypasses_physical() {
        let cfg = parse_config(MINIMAL).unwrap();
        let run = build_run(&cfg, false).unwrap();
        assert_eq!(run.problem.groups.s_c, 1.0);
        assert_eq!(run.problem.g_accel, 1.0);
    }

    #[test]
    fn constant_overrides_are_tagged() {
        let text = format!("{MINIMAL}\n[constants]\nc_tr = 0.05\n");
        let cfg = parse_config(&text).unwrap();
        let run = build_run(&cfg, false).unwrap();
        assert_eq!(run.constants.c_tr.value, 0.05);
        assert_eq!(run.constants.c_tr.method, ConstantMethod::Override);
        assert_eq!(run.constants.c_poi_meanzero.method, ConstantMethod::Analytic);
    }
}
