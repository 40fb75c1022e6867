//! Outer Picard (successive substitution) iteration over the three
//! subproblems, with mean enforcement, convergence and divergence
//! monitoring, and the a-priori bound comparison.
//!
//! One step solves, in order: the Oseen system for the velocity with
//! buoyancy from the current bacteria excess; the bacteria system with the
//! new velocity and the chemotaxis coefficient frozen at the previous
//! iterate; the oxygen system with the new velocity, the new bacteria field
//! and the lagged oxygen inside the consumption nonlinearity. At a fixed
//! point the lagged and current fields agree, so the limit solves the fully
//! coupled discrete system.

use std::sync::Arc;

use crate::assemble::{
    assemble_bacteria, assemble_oseen, assemble_oxygen, unflatten_velocity, OxygenTopBc,
    ScalarSystem,
};
use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::grid::{MacGrid, ScalarField, VectorField};
use crate::linsolve::{bicgstab, gmres, solve_saddle, Method, Precond, SolveOptions};
use crate::model::{ConsumptionFunction, DimensionlessGroups, SourceData};
use crate::ops;

/// Everything a solve needs besides the state.
pub struct ProblemData {
    pub grid: Arc<MacGrid>,
    pub groups: DimensionlessGroups,
    /// gravitational acceleration of the dimensionless system
    pub g_accel: f64,
    pub r: ConsumptionFunction,
    pub sources: SourceData,
    pub oxygen_top: OxygenTopBc,
}

/// Solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// outer relative tolerance
    pub tol: f64,
    pub max_outer: usize,
    /// relaxation factor in (0, 1]; 1 is plain substitution
    pub damping: f64,
    /// linear subproblem tolerance
    pub linear_tol: f64,
    pub linear_max: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_outer: 60,
            damping: 1.0,
            linear_tol: 1e-12,
            linear_max: 60_000,
        }
    }
}

/// Velocity, pressure and the shifted (zero-mean) bacteria/oxygen fields.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub u: VectorField,
    pub p: ScalarField,
    pub n_hat: ScalarField,
    pub c_hat: ScalarField,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl FieldState {
    pub fn zero(grid: &Arc<MacGrid>, alpha1: f64, alpha2: f64) -> FieldState {
        FieldState {
            u: VectorField::zeros(grid),
            p: ScalarField::zeros(grid),
            n_hat: ScalarField::zeros(grid),
            c_hat: ScalarField::zeros(grid),
            alpha1,
            alpha2,
        }
    }

    /// Total bacteria mass `integral(n_hat + alpha1/|Omega|)`.
    pub fn total_bacteria(&self) -> f64 {
        self.n_hat.total() + self.alpha1
    }

    pub fn total_oxygen(&self) -> f64 {
        self.c_hat.total() + self.alpha2
    }

    pub fn validate(&self, oxygen_top: OxygenTopBc) -> Result<()> {
        let scale_n = self.n_hat.max_abs().max(1.0);
        if self.n_hat.mean().abs() > 1e-12 * scale_n {
            return Err(Error::MeanDrift {
                field: "n_hat",
                drift: self.n_hat.mean(),
            });
        }
        if oxygen_top == OxygenTopBc::Neumann {
            let scale_c = self.c_hat.max_abs().max(1.0);
            if self.c_hat.mean().abs() > 1e-12 * scale_c {
                return Err(Error::MeanDrift {
                    field: "c_hat",
                    drift: self.c_hat.mean(),
                });
            }
        }
        let div_norm = ops::div(&self.u).l2();
        let u_norm = self.u.v_norm();
        if div_norm > 1e-10 * u_norm + 1e-13 {
            return Err(Error::SingularSystem {
                detail: format!(
                    "velocity not discretely divergence-free: ||div u|| = {div_norm:.3e} vs ||u||_V = {u_norm:.3e}"
                ),
            });
        }
        Ok(())
    }
}

/// The discrete norms of a state: the gradient (V) norm of the velocity,
/// the zero-mean H1 norms of the shifted scalars (their gradient norms),
/// and the divergence defect.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct StateNorms {
    pub u_v: f64,
    pub n_h1: f64,
    pub c_h1: f64,
    pub div_u: f64,
    pub n_l2: f64,
    pub c_l2: f64,
}

pub fn discrete_norms(state: &FieldState) -> StateNorms {
    StateNorms {
        u_v: state.u.v_norm(),
        n_h1: state.n_hat.grad_norm(),
        c_h1: state.c_hat.grad_norm(),
        div_u: ops::div(&state.u).l2(),
        n_l2: state.n_hat.l2(),
        c_l2: state.c_hat.l2(),
    }
}

/// Projects the shifted fields back to zero mean (under the Dirichlet
/// oxygen top the oxygen mean is determined by the boundary data and left
/// alone). Totals are restored exactly because the totals are carried as
/// `alpha` plus the shifted-field sum.
pub fn enforce_means(state: &mut FieldState, oxygen_top: OxygenTopBc) {
    state.n_hat.project_zero_mean();
    if oxygen_top == OxygenTopBc::Neumann {
        state.c_hat.project_zero_mean();
    }
}

/// Per-iteration record of the outer loop.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    pub du_v: f64,
    pub dn_h1: f64,
    pub dc_h1: f64,
    pub oseen_momentum_residual: f64,
    pub oseen_divergence_residual: f64,
    pub oseen_outer_iterations: usize,
    pub bacteria_residual: f64,
    pub oxygen_residual: f64,
    /// |mean| of the raw subproblem solutions before projection
    pub mean_drift_n: f64,
    pub mean_drift_c: f64,
    /// ratio of successive delta maxima (empirical contraction)
    pub contraction_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct PicardHistory {
    pub records: Vec<IterationRecord>,
}

impl PicardHistory {
    pub fn delta_max(&self, i: usize) -> f64 {
        let r = &self.records[i];
        r.du_v.max(r.dn_h1).max(r.dc_h1)
    }

    /// Geometric mean of the last few contraction ratios.
    pub fn asymptotic_contraction(&self) -> Option<f64> {
        let ratios: Vec<f64> = self
            .records
            .iter()
            .rev()
            .filter_map(|r| r.contraction_ratio)
            .take(3)
            .filter(|r| r.is_finite() && *r > 0.0)
            .collect();
        if ratios.is_empty() {
            None
        } else {
            let log_sum: f64 = ratios.iter().map(|r| r.ln()).sum();
            Some((log_sum / ratios.len() as f64).exp())
        }
    }
}

/// One a-priori bound comparison.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BoundCheck {
    pub norm: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub margin: f64,
}

impl BoundCheck {
    pub fn new(norm: f64, bound: f64) -> BoundCheck {
        BoundCheck {
            norm,
            bound,
            satisfied: norm <= bound,
            margin: bound - norm,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BoundAudit {
    pub velocity: BoundCheck,
    pub bacteria: BoundCheck,
    pub oxygen: BoundCheck,
}

impl BoundAudit {
    pub fn all_satisfied(&self) -> bool {
        self.velocity.satisfied && self.bacteria.satisfied && self.oxygen.satisfied
    }
}

/// Final report of a stationary solve.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub tolerance: f64,
    pub final_delta: f64,
    pub norms: StateNorms,
    pub total_bacteria: f64,
    pub total_oxygen: f64,
    /// observed asymptotic contraction ratio of the Picard deltas
    pub observed_contraction: Option<f64>,
    /// the certificate's contraction constant, when available
    pub pi_value: Option<f64>,
    /// logged, never asserted: the proof's constant bounds exact solution
    /// pairs, not discrete iterates
    pub contraction_within_pi_margin: Option<bool>,
    pub bound_audit: Option<BoundAudit>,
}

fn bordered_csr(a: &crate::sparse::SparseOperator, weight: f64) -> crate::sparse::SparseOperator {
    let n = a.nrows;
    let mut t = Vec::with_capacity(a.nnz() + 2 * n);
    for r in 0..n {
        for idx in a.row_ptr[r]..a.row_ptr[r + 1] {
            t.push((r, a.col_idx[idx], a.values[idx]));
        }
        t.push((r, n, weight));
        t.push((n, r, weight));
    }
    crate::sparse::SparseOperator::from_triplets(n + 1, n + 1, t)
}

/// Solves one scalar subproblem, with the zero-mean border when the system
/// is pure-Neumann singular. Returns the raw solution (mean not yet
/// projected) and the relative residual of the linear solve.
pub fn solve_scalar_system(
    sys: &ScalarSystem,
    warm: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64)> {
    if sys.mean_constrained {
        let d = sys.matrix.diagonal();
        let weight = d.iter().map(|v| v.abs()).sum::<f64>() / d.len().max(1) as f64;
        let weight = if weight > 0.0 {
            weight / (d.len() as f64).sqrt()
        } else {
            1.0
        };
        let bordered = bordered_csr(&sys.matrix, weight);
        let mut rhs = sys.rhs.clone();
        rhs.push(0.0);
        let mut x = vec![0.0; rhs.len()];
        if let Some(w) = warm {
            x[..w.len()].copy_from_slice(w);
        }
        let mut stats = bicgstab(
            &bordered,
            Some(&bordered),
            Precond::Jacobi,
            &rhs,
            &mut x,
            tol,
            max_iterations,
        );
        if !stats.converged {
            // indefinite border occasionally stalls BiCGStab; GMRES restart
            stats = gmres(
                &bordered,
                Some(&bordered),
                Precond::Jacobi,
                60,
                &rhs,
                &mut x,
                tol,
                max_iterations,
            );
        }
        if !stats.converged {
            return Err(Error::SolverDidNotConverge {
                method: "scalar subproblem (bordered)",
                residual: stats.residual,
                iterations: stats.iterations,
                tol,
            });
        }
        x.pop();
        Ok((x, stats.residual))
    } else {
        let mut x = vec![0.0; sys.rhs.len()];
        if let Some(w) = warm {
            x.copy_from_slice(w);
        }
        let stats = bicgstab(
            &sys.matrix,
            Some(&sys.matrix),
            Precond::Jacobi,
            &sys.rhs,
            &mut x,
            tol,
            max_iterations,
        );
        if !stats.converged {
            return Err(Error::SolverDidNotConverge {
                method: "scalar subproblem",
                residual: stats.residual,
                iterations: stats.iterations,
                tol,
            });
        }
        Ok((x, stats.residual))
    }
}

/// One Picard sweep. Returns the new state and the iteration record (the
/// contraction ratio is filled by the outer loop).
pub fn picard_step(
    state: &FieldState,
    prob: &ProblemData,
    opts: &PicardOptions,
) -> Result<(FieldState, IterationRecord)> {
    let grid = &prob.grid;
    let src = &prob.sources;

    // (1) Oseen with buoyancy from the current bacteria excess
    let saddle = assemble_oseen(
        grid,
        &state.u,
        &state.n_hat,
        &prob.groups,
        prob.g_accel,
        &src.force,
    )?;
    let zeros = vec![0.0; grid.cell_count()];
    let saddle_opts = SolveOptions {
        tol: opts.linear_tol,
        max_iterations: 500,
        method: Method::Uzawa,
        precond: Precond::Jacobi,
    };
    let (u_flat, q, sstats) = solve_saddle(&saddle.a, &saddle.div, &saddle.rhs, &zeros, &saddle_opts)?;
    let mut u_new = unflatten_velocity(grid, &u_flat);
    u_new.clamp_boundary();
    let mut p_new = ScalarField::zeros(grid);
    p_new
        .data
        .iter_mut()
        .zip(&q)
        .for_each(|(pv, qv)| *pv = qv / saddle.s_c);
    p_new.project_zero_mean();

    // damping on the velocity before it feeds the transport systems
    let mut u_damped = state.u.clone();
    u_damped.axpy(-1.0, &u_new); // u_old - u_new
    let mut u_next = u_new;
    if opts.damping < 1.0 {
        u_next.axpy(1.0 - opts.damping, &u_damped);
    }

    // (2) bacteria with the new velocity, chemotaxis frozen at the previous
    // iterate
    let bact = assemble_bacteria(
        grid,
        &u_next,
        &state.n_hat,
        &state.c_hat,
        &prob.r,
        prob.groups.chi,
        src.alpha1,
        src.alpha2,
        &src.f_n,
    )?;
    let (n_raw, n_res) =
        solve_scalar_system(&bact, Some(&state.n_hat.data), opts.linear_tol, opts.linear_max)?;
    let mean_drift_n = crate::grid::compensated_sum(&n_raw) / n_raw.len() as f64;
    let scale_n = n_raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if mean_drift_n.abs() > 1e-8 * scale_n {
        return Err(Error::MeanDrift {
            field: "n_hat",
            drift: mean_drift_n,
        });
    }
    let mut n_new = ScalarField {
        grid: grid.clone(),
        data: n_raw,
    };
    if opts.damping < 1.0 {
        let mut blend = state.n_hat.clone();
        blend.axpy(-1.0, &n_new);
        n_new.axpy(1.0 - opts.damping, &blend);
    }

    // (3) oxygen with the new velocity and bacteria, lagged oxygen inside r
    let oxy = assemble_oxygen(
        grid,
        &u_next,
        &n_new,
        &state.c_hat,
        &prob.r,
        &prob.groups,
        src.alpha1,
        src.alpha2,
        &src.f_c,
        prob.oxygen_top,
    )?;
    let (c_raw, c_res) =
        solve_scalar_system(&oxy, Some(&state.c_hat.data), opts.linear_tol, opts.linear_max)?;
    let mean_drift_c = crate::grid::compensated_sum(&c_raw) / c_raw.len() as f64;
    if prob.oxygen_top == OxygenTopBc::Neumann {
        let scale_c = c_raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if mean_drift_c.abs() > 1e-8 * scale_c {
            return Err(Error::MeanDrift {
                field: "c_hat",
                drift: mean_drift_c,
            });
        }
    }
    let mut c_new = ScalarField {
        grid: grid.clone(),
        data: c_raw,
    };
    if opts.damping < 1.0 {
        let mut blend = state.c_hat.clone();
        blend.axpy(-1.0, &c_new);
        c_new.axpy(1.0 - opts.damping, &blend);
    }

    let mut next = FieldState {
        u: u_next,
        p: p_new,
        n_hat: n_new,
        c_hat: c_new,
        alpha1: state.alpha1,
        alpha2: state.alpha2,
    };
    enforce_means(&mut next, prob.oxygen_top);

    let record = IterationRecord {
        du_v: next.u.scaled_diff(&state.u).v_norm(),
        dn_h1: next.n_hat.scaled_diff(&state.n_hat).grad_norm(),
        dc_h1: next.c_hat.scaled_diff(&state.c_hat).grad_norm(),
        oseen_momentum_residual: sstats.momentum_residual,
        oseen_divergence_residual: sstats.divergence_residual,
        oseen_outer_iterations: sstats.outer_iterations,
        bacteria_residual: n_res,
        oxygen_residual: c_res,
        mean_drift_n: mean_drift_n.abs(),
        mean_drift_c: mean_drift_c.abs(),
        contraction_ratio: None,
    };
    Ok((next, record))
}

fn state_norm(state: &FieldState) -> f64 {
    state
        .u
        .v_norm()
        .max(state.n_hat.grad_norm())
        .max(state.c_hat.grad_norm())
}

/// Runs the Picard iteration to a fixed point.
///
/// Divergence (norm growth beyond 10x the reference over at least five
/// iterations, or non-finite values) aborts with the history attached to
/// the error context. Whether the iteration converges outside the
/// certified region is unknown territory; a divergence there is an
/// "outside certified region" outcome, not a defect.
pub fn solve_stationary(
    initial: FieldState,
    prob: &ProblemData,
    opts: &PicardOptions,
    certificate: Option<&Certificate>,
) -> Result<(FieldState, PicardHistory, SolveReport)> {
    initial.validate(prob.oxygen_top)?;
    let mut state = initial;
    let mut history = PicardHistory::default();
    let baseline = state_norm(&state).max(1e-8);
    let mut prev_delta: Option<f64> = None;
    let mut converged = false;
    for _iter in 0..opts.max_outer {
        let (next, mut record) = picard_step(&state, prob, opts)?;
        let delta = record.du_v.max(record.dn_h1).max(record.dc_h1);
        record.contraction_ratio = prev_delta.map(|p| if p > 0.0 { delta / p } else { f64::NAN });
        prev_delta = Some(delta);
        history.records.push(record);
        state = next;
        let norm = state_norm(&state);
        if !norm.is_finite() {
            return Err(Error::Diverged {
                iterations: history.records.len(),
                initial: baseline,
                current: norm,
            });
        }
        if history.records.len() >= 5 && norm > 10.0 * baseline.max(state_norm_after_first(&history, baseline)) {
            return Err(Error::Diverged {
                iterations: history.records.len(),
                initial: baseline,
                current: norm,
            });
        }
        if delta <= opts.tol * (1.0 + norm) {
            converged = true;
            break;
        }
    }
    let norms = discrete_norms(&state);
    let observed = history.asymptotic_contraction();
    let (pi_value, bound_audit, within) = match certificate {
        Some(cert) => {
            let audit = match (
                cert.apriori_u_bound,
                cert.apriori_n_bound,
                cert.apriori_c_bound,
            ) {
                (Some(u), Some(n), Some(c)) => Some(BoundAudit {
                    velocity: BoundCheck::new(norms.u_v, u),
                    bacteria: BoundCheck::new(norms.n_h1, n),
                    oxygen: BoundCheck::new(norms.c_h1, c),
                }),
                _ => None,
            };
            let within = match (cert.pi_value, observed) {
                (Some(pi), Some(obs)) if cert.uniqueness_satisfied() => Some(obs <= pi + 0.1),
                _ => None,
            };
            (cert.pi_value, audit, within)
        }
        None => (None, None, None),
    };
    let report = SolveReport {
        converged,
        iterations: history.records.len(),
        tolerance: opts.tol,
        final_delta: prev_delta.unwrap_or(0.0),
        norms,
        total_bacteria: state.total_bacteria(),
        total_oxygen: state.total_oxygen(),
        observed_contraction: observed,
        pi_value,
        contraction_within_pi_margin: within,
        bound_audit,
    };
    Ok((state, history, report))
}

fn state_norm_after_first(history: &PicardHistory, baseline: f64) -> f64 {
    history
        .records
        .first()
        .map(|r| r.du_v.max(r.dn_h1).max(r.dc_h1))
        .unwrap_or(baseline)
}

/// Standalone Navier-Stokes solve (no coupling): the zero-data branch of
/// the system. Runs the same Oseen linearization to a fixed point.
pub fn solve_navier_stokes(
    grid: &Arc<MacGrid>,
    groups: &DimensionlessGroups,
    g_accel: f64,
    force: &VectorField,
    opts: &PicardOptions,
) -> Result<(VectorField, ScalarField)> {
    let zero_n = ScalarField::zeros(grid);
    let mut u = VectorField::zeros(grid);
    for _ in 0..opts.max_outer {
        let saddle = assemble_oseen(grid, &u, &zero_n, groups, g_accel, force)?;
        let zeros = vec![0.0; grid.cell_count()];
        let sopts = SolveOptions {
            tol: opts.linear_tol,
            max_iterations: 500,
            method: Method::Uzawa,
            precond: Precond::Jacobi,
        };
        let (u_flat, q, _) = solve_saddle(&saddle.a, &saddle.div, &saddle.rhs, &zeros, &sopts)?;
        let mut u_new = unflatten_velocity(grid, &u_flat);
        u_new.clamp_boundary();
        let delta = u_new.scaled_diff(&u).v_norm();
        let done = delta <= opts.tol * (1.0 + u_new.v_norm());
        u = u_new;
        if done {
            let mut p = ScalarField {
                grid: grid.clone(),
                data: q.iter().map(|v| v / saddle.s_c).collect(),
            };
            p.project_zero_mean();
            return Ok((u, p));
        }
    }
    Err(Error::SolverDidNotConverge {
        method: "navier-stokes picard",
        residual: f64::NAN,
        iterations: opts.max_outer,
        tol: opts.tol,
    })
}

/// True when a history exhibits the divergence pattern: the norm grew by
/// more than a factor of ten over at least five iterations.
pub fn divergence_detected(deltas: &[f64], baseline: f64) -> bool {
    deltas.len() >= 5
        && deltas
            .last()
            .map(|d| !d.is_finite() || *d > 10.0 * baseline)
            .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConsumptionFunction;

    fn small_problem(grid_n: usize) -> ProblemData {
        let grid = MacGrid::cube(1.0, grid_n);
        let f_n = ScalarField::from_fn(&grid, |p| {
            0.02 * (std::f64::consts::PI * p[0]).cos() * (std::f64::consts::PI * p[2]).cos()
        });
        let f_c = ScalarField::from_fn(&grid, |p| {
            0.02 * (std::f64::consts::PI * p[1]).cos() * (std::f64::consts::PI * p[2]).cos()
        });
        let force = VectorField::zeros(&grid);
        let sources = SourceData::new(f_n, f_c, force, 0.5, 0.2, true).unwrap();
        ProblemData {
            grid,
            groups: DimensionlessGroups {
                s_c: 1.0,
                gamma: 0.1,
                chi: 0.05,
                delta: 1.0,
                beta: 0.05,
            },
            g_accel: 1.0,
            r: ConsumptionFunction::bump(0.3, 0.1).unwrap(),
            sources,
            oxygen_top: OxygenTopBc::Neumann,
        }
    }

    #[test]
    fn homogeneous_data_is_a_fixed_point() {
        let grid = MacGrid::cube(1.0, 6);
        let prob = ProblemData {
            grid: grid.clone(),
            groups: DimensionlessGroups {
                s_c: 1.0,
                gamma: 0.1,
                chi: 0.05,
                delta: 1.0,
                beta: 0.05,
            },
            g_accel: 1.0,
            r: ConsumptionFunction::bump(0.3, 0.1).unwrap(),
            sources: SourceData::zero(&grid, 0.0, 0.0),
            oxygen_top: OxygenTopBc::Neumann,
        };
        let initial = FieldState::zero(&grid, 0.0, 0.0);
        let (state, history, report) =
            solve_stationary(initial, &prob, &PicardOptions::default(), None).unwrap();
        assert!(report.converged);
        assert_eq!(history.records.len(), 1);
        assert_eq!(state.u.v_norm(), 0.0);
        assert_eq!(state.n_hat.l2(), 0.0);
        assert_eq!(state.c_hat.l2(), 0.0);
    }

    #[test]
    fn small_data_solve_converges_and_conserves() {
        let prob = small_problem(8);
        let initial = FieldState::zero(&prob.grid, 0.5, 0.2);
        let opts = PicardOptions {
            tol: 1e-11,
            ..Default::default()
        };
        let (state, history, report) = solve_stationary(initial, &prob, &opts, None).unwrap();
        assert!(report.converged, "history: {:?}", history.records.len());
        state.validate(OxygenTopBc::Neumann).unwrap();
        assert!((state.total_bacteria() - 0.5).abs() < 1e-12);
        assert!((state.total_oxygen() - 0.2).abs() < 1e-12);
        assert!(state.u.v_norm() > 0.0, "buoyancy must stir the fluid");
        for rec in &history.records {
            assert!(rec.mean_drift_n < 1e-10);
            assert!(rec.mean_drift_c < 1e-10);
        }
    }

    #[test]
    fn decoupled_limit_matches_standalone_solves() {
        // chi = beta = gamma = 0: velocity, bacteria and oxygen decouple
        let mut prob = small_problem(8);
        prob.groups.chi = 1e-300;
        prob.groups.beta = 1e-300;
        prob.groups.gamma = 1e-300;
        let initial = FieldState::zero(&prob.grid, 0.5, 0.2);
        let opts = PicardOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let (state, _, _) = solve_stationary(initial, &prob, &opts, None).unwrap();
        // u solves the pure force-free Navier-Stokes problem: zero
        assert!(state.u.v_norm() < 1e-11);
        // n solves the pure Neumann Poisson problem -lap n = f_n
        let sys = assemble_bacteria(
            &prob.grid,
            &VectorField::zeros(&prob.grid),
            &ScalarField::zeros(&prob.grid),
            &ScalarField::zeros(&prob.grid),
            &prob.r,
            0.0,
            0.5,
            0.2,
            &prob.sources.f_n,
        )
        .unwrap();
        let (n_ref, _) = solve_scalar_system(&sys, None, 1e-13, 100_000).unwrap();
        let mut n_field = ScalarField {
            grid: prob.grid.clone(),
            data: n_ref,
        };
        n_field.project_zero_mean();
        let diff = state.n_hat.scaled_diff(&n_field).grad_norm();
        assert!(diff < 1e-9, "decoupled bacteria mismatch: {diff}");
    }

    #[test]
    fn enforce_means_cases() {
        let grid = MacGrid::cube(1.0, 6);
        let mut state = FieldState::zero(&grid, 0.3, 0.4);
        // already zero mean: unchanged
        let before = state.n_hat.data.clone();
        enforce_means(&mut state, OxygenTopBc::Neumann);
        assert_eq!(state.n_hat.data, before);
        // constant shift removed exactly
        for v in &mut state.n_hat.data {
            *v += 0.7;
        }
        enforce_means(&mut state, OxygenTopBc::Neumann);
        assert_eq!(state.n_hat.mean(), 0.0);
        assert!(state.n_hat.max_abs() < 1e-12);
    }

    #[test]
    fn random_field_projection_is_tiny() {
        use rand::{Rng, SeedableRng};
        let grid = MacGrid::cube(1.0, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut state = FieldState::zero(&grid, 0.5, 0.5);
        for v in &mut state.c_hat.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        enforce_means(&mut state, OxygenTopBc::Neumann);
        assert!(state.c_hat.mean().abs() <= 1e-15 * state.c_hat.l2().max(1.0));
    }

    #[test]
    fn norms_zero_state_and_homogeneity() {
        let grid = MacGrid::cube(1.0, 8);
        let state = FieldState::zero(&grid, 0.0, 0.0);
        let n = discrete_norms(&state);
        assert_eq!(
            (n.u_v, n.n_h1, n.c_h1, n.div_u),
            (0.0, 0.0, 0.0, 0.0)
        );
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let u = VectorField::random_solenoidal(&grid, &mut rng);
        let mut u2 = u.clone();
        u2.axpy(1.0, &u);
        assert!((u2.v_norm() - 2.0 * u.v_norm()).abs() < 1e-12 * u.v_norm());
    }

    #[test]
    fn eigenfield_norm_matches_closed_form() {
        // u1 = sin(pi x) has |grad|^2 integral = pi^2 / 2 over the unit
        // cube in the x-direction alone; compare at two grids for O(h^2)
        let mut errs = Vec::new();
        for n in [8usize, 16] {
            let grid = MacGrid::cube(1.0, n);
            let u = VectorField::from_fn(&grid, |d, p| {
                if d == 0 {
                    (std::f64::consts::PI * p[0]).sin()
                        * (std::f64::consts::PI * p[1]).sin()
                        * (std::f64::consts::PI * p[2]).sin()
                } else {
                    0.0
                }
            });
            // closed form: int |grad u1|^2 = 3 pi^2 / 8
            let exact = (3.0 * std::f64::consts::PI * std::f64::consts::PI / 8.0_f64).sqrt();
            errs.push((u.v_norm() - exact).abs() / exact);
        }
        assert!(errs[1] < errs[0] * 0.3, "{errs:?}"); // roughly O(h^2)
    }

    #[test]
    fn divergence_detector_logic() {
        assert!(!divergence_detected(&[1.0, 2.0, 3.0], 1.0));
        assert!(divergence_detected(&[1.0, 2.0, 4.0, 8.0, 16.0], 1.0));
        assert!(!divergence_detected(&[1.0, 0.5, 0.2, 0.1, 0.05], 1.0));
        assert!(divergence_detected(&[1.0, 1.0, 1.0, 1.0, f64::NAN], 1.0));
    }
}
