//! Report rendering: every subcommand's result exists as a typed struct
//! (serialized to JSON verbatim) and as a flat `key = value` text listing.
//! The JSON layouts are documented in `docs/formats.md`; the structs here
//! deserialize with unknown fields rejected, which is what the format
//! round-trip tests lean on.

use crate::certificate::{Certificate, Check, ConstantMethod, TaggedConstant};
use crate::solver::{BoundAudit, PicardHistory, SolveReport};
use crate::verify::{ConvergenceTable, FluxAudit, OracleReport};

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.17e}"),
        None => "undefined".to_string(),
    }
}

fn method_str(m: ConstantMethod) -> String {
    match m {
        ConstantMethod::Analytic => "analytic".to_string(),
        ConstantMethod::Discrete(g) => format!("discrete({g})"),
        ConstantMethod::Override => "override".to_string(),
    }
}

fn push_constant(out: &mut String, name: &str, c: &TaggedConstant) {
    out.push_str(&format!("constants.{name}.value = {:.17e}\n", c.value));
    out.push_str(&format!(
        "constants.{name}.method = {}\n",
        method_str(c.method)
    ));
}

fn push_checks(out: &mut String, prefix: &str, checks: &[Check]) {
    for c in checks {
        out.push_str(&format!("{prefix}.{}.lhs = {:.17e}\n", c.name, c.lhs));
        out.push_str(&format!("{prefix}.{}.rhs = {:.17e}\n", c.name, c.rhs));
        out.push_str(&format!("{prefix}.{}.slack = {:.17e}\n", c.name, c.slack));
        out.push_str(&format!(
            "{prefix}.{}.satisfied = {}\n",
            c.name, c.satisfied
        ));
    }
}

/// Flat key-value rendering of the certificate.
pub fn certificate_text(cert: &Certificate) -> String {
    let mut out = String::new();
    push_constant(&mut out, "c_poi_dirichlet", &cert.constants.c_poi_dirichlet);
    push_constant(&mut out, "c_poi_meanzero", &cert.constants.c_poi_meanzero);
    push_constant(&mut out, "c_tr", &cert.constants.c_tr);
    push_constant(&mut out, "c_1", &cert.constants.c_1);
    out.push_str(&format!("domain.measure = {:.17e}\n", cert.omega));
    out.push_str(&format!("inputs.f_n_norm = {:.17e}\n", cert.f_n_norm));
    out.push_str(&format!("inputs.f_c_norm = {:.17e}\n", cert.f_c_norm));
    out.push_str(&format!("inputs.force_norm = {:.17e}\n", cert.force_norm));
    out.push_str(&format!("theta1 = {}\n", fmt_opt(cert.theta1)));
    out.push_str(&format!("theta2 = {}\n", fmt_opt(cert.theta2)));
    out.push_str(&format!("gamma0 = {}\n", fmt_opt(cert.gamma0)));
    out.push_str(&format!("gamma1 = {}\n", fmt_opt(cert.gamma1)));
    out.push_str(&format!("gamma2 = {}\n", fmt_opt(cert.gamma2)));
    out.push_str(&format!("gamma3 = {}\n", fmt_opt(cert.gamma3)));
    out.push_str(&format!("pi = {}\n", fmt_opt(cert.pi_value)));
    push_checks(&mut out, "check.existence", &cert.existence_checks);
    push_checks(&mut out, "check.uniqueness", &cert.uniqueness_checks);
    out.push_str(&format!(
        "existence.satisfied = {}\n",
        cert.existence_satisfied()
    ));
    out.push_str(&format!(
        "uniqueness.satisfied = {}\n",
        cert.uniqueness_satisfied()
    ));
    out.push_str(&format!("lambda.feasible = {}\n", cert.lambda.feasible));
    out.push_str(&format!("lambda.k1 = {:.17e}\n", cert.lambda.k1));
    out.push_str(&format!("lambda.k2 = {:.17e}\n", cert.lambda.k2));
    out.push_str(&format!("lambda.k3 = {:.17e}\n", cert.lambda.k3));
    if let Some([l1, l2, l3]) = cert.lambda.witness {
        out.push_str(&format!("lambda.witness.lambda1 = {l1:.17e}\n"));
        out.push_str(&format!("lambda.witness.lambda2 = {l2:.17e}\n"));
        out.push_str(&format!("lambda.witness.lambda3 = {l3:.17e}\n"));
    }
    out.push_str(&format!(
        "apriori.u_bound = {}\n",
        fmt_opt(cert.apriori_u_bound)
    ));
    out.push_str(&format!(
        "apriori.n_bound = {}\n",
        fmt_opt(cert.apriori_n_bound)
    ));
    out.push_str(&format!(
        "apriori.c_bound = {}\n",
        fmt_opt(cert.apriori_c_bound)
    ));
    out
}

pub fn solve_report_text(report: &SolveReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("solve.converged = {}\n", report.converged));
    out.push_str(&format!("solve.iterations = {}\n", report.iterations));
    out.push_str(&format!("solve.tolerance = {:.3e}\n", report.tolerance));
    out.push_str(&format!("solve.final_delta = {:.17e}\n", report.final_delta));
    out.push_str(&format!("norms.u_v = {:.17e}\n", report.norms.u_v));
    out.push_str(&format!("norms.n_h1 = {:.17e}\n", report.norms.n_h1));
    out.push_str(&format!("norms.c_h1 = {:.17e}\n", report.norms.c_h1));
    out.push_str(&format!("norms.div_u = {:.17e}\n", report.norms.div_u));
    out.push_str(&format!("norms.n_l2 = {:.17e}\n", report.norms.n_l2));
    out.push_str(&format!("norms.c_l2 = {:.17e}\n", report.norms.c_l2));
    out.push_str(&format!(
        "totals.bacteria = {:.17e}\n",
        report.total_bacteria
    ));
    out.push_str(&format!("totals.oxygen = {:.17e}\n", report.total_oxygen));
    out.push_str(&format!(
        "contraction.observed = {}\n",
        fmt_opt(report.observed_contraction)
    ));
    out.push_str(&format!(
        "contraction.pi = {}\n",
        fmt_opt(report.pi_value)
    ));
    if let Some(within) = report.contraction_within_pi_margin {
        out.push_str(&format!("contraction.within_pi_margin = {within}\n"));
    }
    if let Some(audit) = &report.bound_audit {
        out.push_str(&bound_audit_text(audit));
    }
    out
}

pub fn bound_audit_text(audit: &BoundAudit) -> String {
    let mut out = String::new();
    for (name, check) in [
        ("velocity", &audit.velocity),
        ("bacteria", &audit.bacteria),
        ("oxygen", &audit.oxygen),
    ] {
        out.push_str(&format!("apriori.{name}.norm = {:.17e}\n", check.norm));
        out.push_str(&format!("apriori.{name}.bound = {:.17e}\n", check.bound));
        out.push_str(&format!("apriori.{name}.margin = {:.17e}\n", check.margin));
        out.push_str(&format!(
            "apriori.{name}.satisfied = {}\n",
            check.satisfied
        ));
    }
    out.push_str(&format!("apriori.all_satisfied = {}\n", audit.all_satisfied()));
    out
}

pub fn flux_audit_text(audit: &FluxAudit) -> String {
    format!(
        "flux.bottom.n_neumann_residual = {:.17e}\nflux.bottom.c_neumann_residual = {:.17e}\nflux.upper.n_robin_residual = {:.17e}\n",
        audit.bottom_n_neumann, audit.bottom_c_neumann, audit.upper_robin_n
    )
}

pub fn oracle_report_text(report: &OracleReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "newton.converged = {}\nnewton.iterations = {}\nnewton.residual = {:.17e}\n",
        report.newton.converged, report.newton.iterations, report.newton.residual
    ));
    out.push_str(&format!(
        "picard.converged = {}\n",
        report.picard_converged
    ));
    match &report.discrepancy {
        Some(d) => {
            out.push_str(&format!("discrepancy.u = {:.17e}\n", d.u));
            out.push_str(&format!("discrepancy.n = {:.17e}\n", d.n));
            out.push_str(&format!("discrepancy.c = {:.17e}\n", d.c));
            out.push_str(&format!("discrepancy.p = {:.17e}\n", d.p));
            out.push_str(&format!("discrepancy.max = {:.17e}\n", d.max));
        }
        None => out.push_str("discrepancy = unavailable (a solver did not converge)\n"),
    }
    out
}

/// JSON wrapper for `certify`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyDocument {
    pub certificate: Certificate,
    pub existence_satisfied: bool,
    pub uniqueness_satisfied: bool,
}

impl CertifyDocument {
    pub fn new(certificate: Certificate) -> CertifyDocument {
        let existence_satisfied = certificate.existence_satisfied();
        let uniqueness_satisfied = certificate.uniqueness_satisfied();
        CertifyDocument {
            certificate,
            existence_satisfied,
            uniqueness_satisfied,
        }
    }
}

/// JSON wrapper for `solve`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDocument {
    pub certificate: Certificate,
    pub report: SolveReport,
    pub history: PicardHistory,
}

/// JSON wrapper for `verify`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyDocument {
    pub bound_audit: BoundAudit,
    pub flux_audit: FluxAudit,
}

/// JSON wrapper for `mms`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsDocument {
    pub table: ConvergenceTable,
}
