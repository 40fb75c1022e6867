//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 failed
//! certificate or audit checks, 3 solver divergence / non-convergence.
//! Stdout carries the report (flat text by default, JSON with `--json`);
//! exit codes are the only machine-readable pass/fail channel.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use bioconv_core::config::{build_run, load_config, BuiltRun};
use bioconv_core::fields_io::{read_fields, write_fields};
use bioconv_core::report::{
    bound_audit_text, certificate_text, flux_audit_text, solve_report_text, CertifyDocument,
    MmsDocument, SolveDocument, VerifyDocument,
};
use bioconv_core::solver::{solve_stationary, PicardOptions};
use bioconv_core::verify::{audit_apriori, audit_boundary_fluxes, convergence_study};
use bioconv_core::{Error, FieldState};

#[derive(Parser)]
#[command(
    name = "bioconv",
    about = "Stationary bioconvection chamber solver with a solvability certificate",
    version
)]
struct Cli {
    /// Emit the report as JSON on stdout instead of flat text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the existence/uniqueness certificate for a configuration
    Certify {
        config: PathBuf,
        /// Subtract the discrete mean of f_n instead of rejecting it
        #[arg(long = "project-fn")]
        project_fn: bool,
    },
    /// Solve the stationary system; writes fields and reports to the
    /// output directory
    Solve {
        config: PathBuf,
        #[arg(long = "project-fn")]
        project_fn: bool,
        /// Override the configured output directory
        #[arg(long)]
        output: Option<PathBuf>,
        /// Abort when the existence certificate fails (default warns and
        /// proceeds: the hypotheses are sufficient, not necessary)
        #[arg(long)]
        strict: bool,
    },
    /// Audit stored fields against the a-priori bounds and boundary fluxes
    Verify { config: PathBuf, fields: PathBuf },
    /// Manufactured-solution convergence study over a halving grid sequence
    Mms {
        case: String,
        /// cells per axis, e.g. 8 16 32
        #[arg(required = true)]
        grids: Vec<usize>,
        /// Also write the table as CSV to this path
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } | Error::SolverDidNotConverge { .. } => 3,
        Error::HypothesisViolated { .. } => 2,
        _ => 1,
    }
}

fn load(config: &Path, project_fn: bool) -> Result<BuiltRun, Error> {
    let cfg = load_config(config)?;
    build_run(&cfg, project_fn)
}

fn run_certify(config: &Path, project_fn: bool, json: bool) -> Result<u8, Error> {
    let run = load(config, project_fn)?;
    let doc = CertifyDocument::new(run.certificate);
    if json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        print!("{}", certificate_text(&doc.certificate));
    }
    if doc.existence_satisfied {
        Ok(0)
    } else {
        for check in doc
            .certificate
            .existence_checks
            .iter()
            .filter(|c| !c.satisfied)
        {
            eprintln!(
                "existence check failed: {} (lhs {:.6e}, rhs {:.6e}, slack {:.6e})",
                check.name, check.lhs, check.rhs, check.slack
            );
        }
        Ok(2)
    }
}

fn run_solve(
    config: &Path,
    project_fn: bool,
    output: Option<PathBuf>,
    strict: bool,
    json: bool,
) -> Result<u8, Error> {
    let run = load(config, project_fn)?;
    let strict = strict || run.config.solver.strict_certificate;
    if !run.certificate.existence_satisfied() {
        if strict {
            eprintln!("existence certificate failed and --strict is set; aborting");
            return Ok(2);
        }
        eprintln!("warning: existence certificate failed; proceeding (hypotheses are sufficient, not necessary)");
    }
    let out_dir = output.unwrap_or_else(|| run.config.output.directory.clone());
    std::fs::create_dir_all(&out_dir)?;

    let initial = FieldState::zero(
        &run.problem.grid,
        run.problem.sources.alpha1,
        run.problem.sources.alpha2,
    );
    let result = solve_stationary(initial, &run.problem, &run.picard, Some(&run.certificate));
    let (state, history, report) = match result {
        Ok(t) => t,
        Err(e @ Error::Diverged { .. }) => {
            eprintln!("solver diverged: {e}");
            return Ok(3);
        }
        Err(e) => return Err(e),
    };

    let (vtk, sidecar) = write_fields(&state, &out_dir.join("fields"))?;
    std::fs::write(
        out_dir.join("certificate.txt"),
        certificate_text(&run.certificate),
    )?;
    std::fs::write(
        out_dir.join("certificate.json"),
        serde_json::to_string_pretty(&CertifyDocument::new(run.certificate.clone()))
            .expect("serializable"),
    )?;
    let doc = SolveDocument {
        certificate: run.certificate,
        report: report.clone(),
        history,
    };
    std::fs::write(out_dir.join("solve_report.txt"), solve_report_text(&report))?;
    std::fs::write(
        out_dir.join("solve_report.json"),
        serde_json::to_string_pretty(&doc).expect("serializable"),
    )?;
    if json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        print!("{}", solve_report_text(&report));
        println!("wrote {} and {}", vtk.display(), sidecar.display());
    }
    if report.converged {
        Ok(0)
    } else {
        eprintln!(
            "solver did not converge within {} iterations (final delta {:.3e})",
            report.iterations, report.final_delta
        );
        Ok(3)
    }
}

fn run_verify(config: &Path, fields: &Path, json: bool) -> Result<u8, Error> {
    let run = load(config, true)?;
    let state = read_fields(fields)?;
    run.problem.grid.same_grid(&state.n_hat.grid)?;
    let bound_audit = audit_apriori(&state, &run.certificate)?;
    let flux_audit = audit_boundary_fluxes(&state, &run.problem.r, run.problem.groups.chi);
    let doc = VerifyDocument {
        bound_audit,
        flux_audit,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        print!("{}", bound_audit_text(&doc.bound_audit));
        print!("{}", flux_audit_text(&doc.flux_audit));
    }
    if doc.bound_audit.all_satisfied() {
        Ok(0)
    } else {
        eprintln!("a-priori bound audit failed");
        Ok(2)
    }
}

fn run_mms(case: &str, grids: &[usize], csv: Option<PathBuf>, json: bool) -> Result<u8, Error> {
    let opts = PicardOptions {
        tol: 1e-11,
        ..Default::default()
    };
    let table = convergence_study(case, grids, &opts)?;
    if let Some(path) = csv {
        std::fs::write(&path, table.to_csv())?;
    }
    if json {
        let doc = MmsDocument { table };
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        print!("{}", table.to_text());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Certify { config, project_fn } => run_certify(config, *project_fn, cli.json),
        Command::Solve {
            config,
            project_fn,
            output,
            strict,
        } => run_solve(config, *project_fn, output.clone(), *strict, cli.json),
        Command::Verify { config, fields } => run_verify(config, fields, cli.json),
        Command::Mms { case, grids, csv } => run_mms(case, grids, csv.clone(), cli.json),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
