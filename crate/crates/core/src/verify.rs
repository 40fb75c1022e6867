//! Verification machinery: manufactured solutions with compensating
//! sources, grid-convergence studies, a-priori bound audits, boundary flux
//! audits, and a monolithic Newton oracle on dense linear algebra that the
//! Picard path is checked against.

use crate::assemble::{flatten_velocity, unflatten_velocity, velocity_offsets, OxygenTopBc};
use crate::certificate::Certificate;
use crate::dense::{norm2, DenseMatrix, LuDecomposition};
use crate::error::{Error, Result};
use crate::grid::{MacGrid, ScalarField, VectorField};
use crate::model::{ChamberDomain, ConsumptionFunction, DimensionlessGroups, SourceData};
use crate::ops;
use crate::solver::{BoundAudit, BoundCheck, FieldState, PicardOptions, ProblemData};

type ScalarFn = Box<dyn Fn([f64; 3]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(usize, [f64; 3]) -> f64 + Send + Sync>;

/// A manufactured case: exact fields plus the compensating sources obtained
/// by substituting them into the strong equations.
pub struct MmsCase {
    pub name: &'static str,
    pub dom: ChamberDomain,
    pub groups: DimensionlessGroups,
    pub g_accel: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub r_c_star: f64,
    pub r_width: f64,
    pub u_exact: VectorFn,
    pub p_exact: ScalarFn,
    pub n_hat_exact: ScalarFn,
    pub c_hat_exact: ScalarFn,
    pub f_n: ScalarFn,
    pub f_c: ScalarFn,
    pub force: VectorFn,
}

/// Builds a named manufactured case.
///
/// `rest` is the zero branch: zero fields, zero totals, zero sources.
///
/// `stratified` layers the oxygen in depth, `c_hat = A_c cos(pi z / L3)`,
/// with a two-mode bacteria excess and a recirculating velocity built from
/// a stream function; every profile is chosen with the exact wall symmetry
/// of the discretization (cosines for the scalars, odd sine factors for
/// tangential velocities), so the boundary conditions hold exactly and the
/// interior truncation order is visible untainted.
pub fn mms_case(name: &str) -> Result<MmsCase> {
    let dom = ChamberDomain::new([1.0, 1.0, 1.0])?;
    let groups = DimensionlessGroups {
        s_c: 1.0,
        gamma: 0.1,
        chi: 0.05,
        delta: 1.0,
        beta: 0.05,
    };
    let g_accel = 1.0;
    match name {
        "rest" => Ok(MmsCase {
            name: "rest",
            dom,
            groups,
            g_accel,
            alpha1: 0.0,
            alpha2: 0.0,
            r_c_star: 0.3,
            r_width: 0.1,
            u_exact: Box::new(|_, _| 0.0),
            p_exact: Box::new(|_| 0.0),
            n_hat_exact: Box::new(|_| 0.0),
            c_hat_exact: Box::new(|_| 0.0),
            f_n: Box::new(|_| 0.0),
            f_c: Box::new(|_| 0.0),
            force: Box::new(|_, _| 0.0),
        }),
        "stratified" => {
            let l = dom.edges;
            let (a, b, q) = (
                std::f64::consts::PI / l[0],
                std::f64::consts::PI / l[1],
                std::f64::consts::PI / l[2],
            );
            let (a_u, a_n, a_c, a_p) = (0.1, 0.25, 0.15, 0.05);
            let alpha1 = 0.5;
            let alpha2 = 0.2;
            let (r_c_star, r_width) = (0.3, 0.1);
            let r = ConsumptionFunction::bump(r_c_star, r_width)?;
            let omega = dom.measure();

            let u_val = move |d: usize, p: [f64; 3]| -> f64 {
                let (x, y, z) = (p[0], p[1], p[2]);
                match d {
                    0 => a_u * b * (a * x).sin().powi(2) * (2.0 * b * y).sin() * (q * z).sin(),
                    1 => -a_u * a * (2.0 * a * x).sin() * (b * y).sin().powi(2) * (q * z).sin(),
                    _ => 0.0,
                }
            };
            // gradient of component d
            let u_grad = move |d: usize, p: [f64; 3]| -> [f64; 3] {
                let (x, y, z) = (p[0], p[1], p[2]);
                match d {
                    0 => [
                        a_u * b * a * (2.0 * a * x).sin() * (2.0 * b * y).sin() * (q * z).sin(),
                        a_u * b * 2.0 * b * (a * x).sin().powi(2) * (2.0 * b * y).cos()
                            * (q * z).sin(),
                        a_u * b * q * (a * x).sin().powi(2) * (2.0 * b * y).sin() * (q * z).cos(),
                    ],
                    1 => [
                        -a_u * a * 2.0 * a * (2.0 * a * x).cos() * (b * y).sin().powi(2)
                            * (q * z).sin(),
                        -a_u * a * b * (2.0 * a * x).sin() * (2.0 * b * y).sin() * (q * z).sin(),
                        -a_u * a * q * (2.0 * a * x).sin() * (b * y).sin().powi(2) * (q * z).cos(),
                    ],
                    _ => [0.0, 0.0, 0.0],
                }
            };
            let u_lap = move |d: usize, p: [f64; 3]| -> f64 {
                let (x, y, z) = (p[0], p[1], p[2]);
                match d {
                    0 => {
                        a_u * b
                            * ((2.0 * a * a * (2.0 * a * x).cos() * (2.0 * b * y).sin())
                                - (4.0 * b * b + q * q)
                                    * (a * x).sin().powi(2)
                                    * (2.0 * b * y).sin())
                            * (q * z).sin()
                    }
                    1 => {
                        -a_u * a
                            * (2.0 * a * x).sin()
                            * (-4.0 * a * a * (b * y).sin().powi(2)
                                + 2.0 * b * b * (2.0 * b * y).cos()
                                - q * q * (b * y).sin().powi(2))
                            * (q * z).sin()
                    }
                    _ => 0.0,
                }
            };

            let n_val = move |p: [f64; 3]| a_n * (a * p[0]).cos() * (q * p[2]).cos();
            let n_grad = move |p: [f64; 3]| -> [f64; 3] {
                [
                    -a_n * a * (a * p[0]).sin() * (q * p[2]).cos(),
                    0.0,
                    -a_n * q * (a * p[0]).cos() * (q * p[2]).sin(),
                ]
            };
            let n_lap = move |p: [f64; 3]| -(a * a + q * q) * a_n * (a * p[0]).cos() * (q * p[2]).cos();

            let c_val = move |p: [f64; 3]| a_c * (q * p[2]).cos();
            let c_grad = move |p: [f64; 3]| -> [f64; 3] { [0.0, 0.0, -a_c * q * (q * p[2]).sin()] };
            let c_lap = move |p: [f64; 3]| -a_c * q * q * (q * p[2]).cos();

            let p_val = move |pt: [f64; 3]| a_p * (a * pt[0]).cos() * (q * pt[2]).cos();
            let p_grad = move |pt: [f64; 3]| -> [f64; 3] {
                [
                    -a_p * a * (a * pt[0]).sin() * (q * pt[2]).cos(),
                    0.0,
                    -a_p * q * (a * pt[0]).cos() * (q * pt[2]).sin(),
                ]
            };

            // F = -S_c lap(u) + (u . grad) u + S_c grad(p) - gamma S_c n_hat g
            let gr = groups;
            let force = move |d: usize, pt: [f64; 3]| -> f64 {
                let mut conv = 0.0;
                let gd = u_grad(d, pt);
                for e in 0..3 {
                    conv += u_val(e, pt) * gd[e];
                }
                let mut f = -gr.s_c * u_lap(d, pt) + conv + gr.s_c * p_grad(pt)[d];
                if d == 2 {
                    f += gr.gamma * gr.s_c * g_accel * n_val(pt);
                }
                f
            };

            // f_n = -lap(n) + u.grad(n) + chi div(n r(c) grad c), expanded as
            // chi [ r grad n . grad c + n r' |grad c|^2 + n r lap c ]
            let mean_n = alpha1 / omega;
            let mean_c = alpha2 / omega;
            let r_for_n = ConsumptionFunction::bump(r_c_star, r_width)?;
            let f_n = move |pt: [f64; 3]| -> f64 {
                let n_full = n_val(pt) + mean_n;
                let c_full = c_val(pt) + mean_c;
                let gn = n_grad(pt);
                let gc = c_grad(pt);
                let rv = r_for_n.eval(c_full);
                let rp = r_for_n.eval_deriv(c_full).expect("bump has a derivative");
                let mut adv = 0.0;
                let mut dot = 0.0;
                let mut gc2 = 0.0;
                for e in 0..3 {
                    adv += u_val(e, pt) * gn[e];
                    dot += gn[e] * gc[e];
                    gc2 += gc[e] * gc[e];
                }
                -n_lap(pt)
                    + adv
                    + gr.chi * (rv * dot + n_full * rp * gc2 + n_full * rv * c_lap(pt))
            };

            // f_c = -delta lap(c) + u.grad(c) + beta r(c) n
            let f_c = move |pt: [f64; 3]| -> f64 {
                let n_full = n_val(pt) + mean_n;
                let c_full = c_val(pt) + mean_c;
                let gc = c_grad(pt);
                let mut adv = 0.0;
                for e in 0..3 {
                    adv += u_val(e, pt) * gc[e];
                }
                -gr.delta * c_lap(pt) + adv + gr.beta * r.eval(c_full) * n_full
            };

            Ok(MmsCase {
                name: "stratified",
                dom,
                groups,
                g_accel,
                alpha1,
                alpha2,
                r_c_star,
                r_width,
                u_exact: Box::new(u_val),
                p_exact: Box::new(p_val),
                n_hat_exact: Box::new(n_val),
                c_hat_exact: Box::new(c_val),
                f_n: Box::new(f_n),
                f_c: Box::new(f_c),
                force: Box::new(force),
            })
        }
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

impl MmsCase {
    /// Samples the case on an `m^3` grid: problem data plus the exact
    /// discrete state the solution is compared against.
    pub fn problem_on(&self, m: usize) -> Result<(ProblemData, FieldState)> {
        let grid = MacGrid::new(self.dom.edges, [m, m, m])?;
        let f_n = ScalarField::from_fn(&grid, |p| (self.f_n)(p));
        let f_c = ScalarField::from_fn(&grid, |p| (self.f_c)(p));
        let force = VectorField::from_fn(&grid, |d, p| (self.force)(d, p));
        let sources = SourceData::new_unchecked(f_n, f_c, force, self.alpha1, self.alpha2);
        let prob = ProblemData {
            grid: grid.clone(),
            groups: self.groups,
            g_accel: self.g_accel,
            r: ConsumptionFunction::bump(self.r_c_star, self.r_width)?,
            sources,
            oxygen_top: OxygenTopBc::Neumann,
        };
        let mut n_hat = ScalarField::from_fn(&grid, |p| (self.n_hat_exact)(p));
        let mut c_hat = ScalarField::from_fn(&grid, |p| (self.c_hat_exact)(p));
        // sampled means are O(h^2), not zero; compare against the projected
        // representative of the same zero-mean class
        n_hat.project_zero_mean();
        c_hat.project_zero_mean();
        let mut u = VectorField::from_fn(&grid, |d, p| (self.u_exact)(d, p));
        u.clamp_boundary();
        let mut p_field = ScalarField::from_fn(&grid, |p| (self.p_exact)(p));
        p_field.project_zero_mean();
        let exact = FieldState {
            u,
            p: p_field,
            n_hat,
            c_hat,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
        };
        Ok((prob, exact))
    }
}

/// Observed orders `log2(e_h / e_{h/2})` for a halving error sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub err_u: f64,
    pub err_n: f64,
    pub err_c: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceTable {
    pub case: String,
    pub rows: Vec<ConvergenceRow>,
    pub orders_u: Vec<f64>,
    pub orders_n: Vec<f64>,
    pub orders_c: Vec<f64>,
    /// errors decreased monotonically on refinement
    pub monotone: bool,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cells,err_u,err_n,err_c,order_u,order_n,order_c\n");
        for (i, row) in self.rows.iter().enumerate() {
            let ord = |v: &Vec<f64>| {
                if i == 0 {
                    String::new()
                } else {
                    format!("{:.6}", v[i - 1])
                }
            };
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{},{},{}\n",
                row.cells,
                row.err_u,
                row.err_n,
                row.err_c,
                ord(&self.orders_u),
                ord(&self.orders_n),
                ord(&self.orders_c)
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "convergence study, case `{}` (errors: u in V-norm, n/c in H1 seminorm)\n",
            self.case
        );
        out.push_str("  cells      err_u          err_n          err_c          ord_u  ord_n  ord_c\n");
        for (i, row) in self.rows.iter().enumerate() {
            let ord = |v: &Vec<f64>| {
                if i == 0 {
                    "  -  ".to_string()
                } else {
                    format!("{:5.2}", v[i - 1])
                }
            };
            out.push_str(&format!(
                "  {:>5}  {:13.6e}  {:13.6e}  {:13.6e}  {}  {}  {}\n",
                row.cells,
                row.err_u,
                row.err_n,
                row.err_c,
                ord(&self.orders_u),
                ord(&self.orders_n),
                ord(&self.orders_c)
            ));
        }
        if !self.monotone {
            out.push_str("  warning: errors are not monotone under refinement\n");
        }
        out
    }
}

/// Runs the case on a halving grid sequence and reports observed orders.
pub fn convergence_study(
    case_name: &str,
    grids: &[usize],
    opts: &PicardOptions,
) -> Result<ConvergenceTable> {
    if grids.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "grids",
            value: grids.len() as f64,
            reason: "a convergence study needs at least two grids",
        });
    }
    for w in grids.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidParameter {
                name: "grids",
                value: w[1] as f64,
                reason: "grids must form a halving sequence (each double the last)",
            });
        }
    }
    let mut rows = Vec::new();
    for &m in grids {
        let case = mms_case(case_name)?;
        let (prob, exact) = case.problem_on(m)?;
        let initial = FieldState::zero(&prob.grid, case.alpha1, case.alpha2);
        let (state, _, report) = crate::solver::solve_stationary(initial, &prob, opts, None)?;
        if !report.converged {
            return Err(Error::SolverDidNotConverge {
                method: "picard (mms study)",
                residual: report.final_delta,
                iterations: report.iterations,
                tol: opts.tol,
            });
        }
        rows.push(ConvergenceRow {
            cells: m,
            err_u: state.u.scaled_diff(&exact.u).v_norm(),
            err_n: state.n_hat.scaled_diff(&exact.n_hat).grad_norm(),
            err_c: state.c_hat.scaled_diff(&exact.c_hat).grad_norm(),
        });
    }
    let eu: Vec<f64> = rows.iter().map(|r| r.err_u).collect();
    let en: Vec<f64> = rows.iter().map(|r| r.err_n).collect();
    let ec: Vec<f64> = rows.iter().map(|r| r.err_c).collect();
    let monotone = eu.windows(2).all(|w| w[1] <= w[0])
        && en.windows(2).all(|w| w[1] <= w[0])
        && ec.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceTable {
        case: case_name.to_string(),
        rows,
        orders_u: observed_orders(&eu),
        orders_n: observed_orders(&en),
        orders_c: observed_orders(&ec),
        monotone,
    })
}

/// Compares the discrete norms of a converged state against the
/// certificate's a-priori bounds.
pub fn audit_apriori(state: &FieldState, cert: &Certificate) -> Result<BoundAudit> {
    match (
        cert.apriori_u_bound,
        cert.apriori_n_bound,
        cert.apriori_c_bound,
    ) {
        (Some(u), Some(n), Some(c)) => Ok(BoundAudit {
            velocity: BoundCheck::new(state.u.v_norm(), u),
            bacteria: BoundCheck::new(state.n_hat.grad_norm(), n),
            oxygen: BoundCheck::new(state.c_hat.grad_norm(), c),
        }),
        _ => Err(Error::Config(
            "certificate has no a-priori bounds (existence hypotheses failed)".to_string(),
        )),
    }
}

/// Reconstructed boundary flux residuals (second-order one-sided
/// differences): the homogeneous Neumann defects of both scalars on the
/// bottom wall, and the flux-balance defect
/// `chi n r(c) grad(c).nu - grad(n).nu` on the five upper walls.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FluxAudit {
    pub bottom_n_neumann: f64,
    pub bottom_c_neumann: f64,
    pub upper_robin_n: f64,
}

pub fn audit_boundary_fluxes(
    state: &FieldState,
    r: &ConsumptionFunction,
    chi: f64,
) -> FluxAudit {
    let g = &state.n_hat.grid;
    let mean_n = state.alpha1 / g.measure();
    let mean_c = state.alpha2 / g.measure();
    // outward normal derivative and wall value from the three cells nearest
    // the wall along axis d
    let probe = |s: &ScalarField, d: usize, idx: [usize; 3], low: bool| -> (f64, f64) {
        let step = match d {
            0 => 1isize,
            1 => g.n[0] as isize,
            _ => (g.n[0] * g.n[1]) as isize,
        };
        let c0 = g.cell_idx(idx[0], idx[1], idx[2]) as isize;
        let dir = if low { step } else { -step };
        let f0 = s.data[c0 as usize];
        let f1 = s.data[(c0 + dir) as usize];
        let f2 = s.data[(c0 + 2 * dir) as usize];
        let h = g.h[d];
        let inward = (-2.0 * f0 + 3.0 * f1 - f2) / h;
        let wall = (15.0 * f0 - 10.0 * f1 + 3.0 * f2) / 8.0;
        (-inward, wall) // outward normal derivative
    };
    let mut bottom_n: f64 = 0.0;
    let mut bottom_c: f64 = 0.0;
    let mut upper: f64 = 0.0;
    let n = g.n;
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let idx = [i, j, k];
                for d in 0..3 {
                    for (low, at_wall) in [(true, idx[d] == 0), (false, idx[d] == n[d] - 1)] {
                        if !at_wall {
                            continue;
                        }
                        let (dn_nu, n_wall) = probe(&state.n_hat, d, idx, low);
                        let (dc_nu, c_wall) = probe(&state.c_hat, d, idx, low);
                        if d == 2 && low {
                            // bottom: plain Neumann for both fields
                            bottom_n = bottom_n.max(dn_nu.abs());
                            bottom_c = bottom_c.max(dc_nu.abs());
                        } else {
                            let n_full = n_wall + mean_n;
                            let c_full = c_wall + mean_c;
                            let robin = chi * n_full * r.eval(c_full) * dc_nu - dn_nu;
                            upper = upper.max(robin.abs());
                        }
                    }
                }
            }
        }
    }
    FluxAudit {
        bottom_n_neumann: bottom_n,
        bottom_c_neumann: bottom_c,
        upper_robin_n: upper,
    }
}

/// Newton outcome, reported separately from any field discrepancy.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NewtonOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Discrepancy {
    pub u: f64,
    pub n: f64,
    pub c: f64,
    pub p: f64,
    pub max: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OracleReport {
    pub newton: NewtonOutcome,
    pub picard_converged: bool,
    /// relative field discrepancies; present only when both solvers
    /// converged
    pub discrepancy: Option<Discrepancy>,
}

/// Residual of the fully coupled discrete nonlinear system (no lagging),
/// built from the same stencil operators the Picard path uses.
struct CoupledSystem<'p> {
    prob: &'p ProblemData,
    nu: usize,
    nc: usize,
    dscale: f64,
}

impl<'p> CoupledSystem<'p> {
    fn new(prob: &'p ProblemData) -> CoupledSystem<'p> {
        let grid = &prob.grid;
        let off = velocity_offsets(grid);
        let h = grid.h;
        let dscale = prob.groups.s_c
            * 2.0
            * (1.0 / (h[0] * h[0]) + 1.0 / (h[1] * h[1]) + 1.0 / (h[2] * h[2]));
        CoupledSystem {
            prob,
            nu: off[3],
            nc: grid.cell_count(),
            dscale,
        }
    }

    fn dim(&self) -> usize {
        let base = self.nu + 3 * self.nc + 2; // u, q, n, c, mu_p, mu_n
        match self.prob.oxygen_top {
            OxygenTopBc::Neumann => base + 1, // + mu_c
            OxygenTopBc::Dirichlet => base,
        }
    }

    fn unpack(&self, x: &[f64]) -> (VectorField, ScalarField, ScalarField, ScalarField) {
        let grid = &self.prob.grid;
        let u = unflatten_velocity(grid, &x[..self.nu]);
        let take = |lo: usize| ScalarField {
            grid: grid.clone(),
            data: x[lo..lo + self.nc].to_vec(),
        };
        (
            u,
            take(self.nu),
            take(self.nu + self.nc),
            take(self.nu + 2 * self.nc),
        )
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let prob = self.prob;
        let grid = &prob.grid;
        let gr = &prob.groups;
        let (u, q, n_hat, c_hat) = self.unpack(x);
        let mu_p = x[self.nu + 3 * self.nc];
        let mu_n = x[self.nu + 3 * self.nc + 1];
        let mu_c = match prob.oxygen_top {
            OxygenTopBc::Neumann => x[self.nu + 3 * self.nc + 2],
            OxygenTopBc::Dirichlet => 0.0,
        };

        // momentum
        let mut mom = ops::laplacian_velocity(&u);
        for d in 0..3 {
            for v in &mut mom.comp[d] {
                *v *= -gr.s_c;
            }
        }
        mom.axpy(1.0, &ops::advect_velocity(&u, &u));
        mom.axpy(1.0, &ops::grad(&q));
        mom.axpy(-1.0, &prob.sources.force);
        // buoyancy: gamma S_c n_hat g with g = (0,0,-g)
        let m2 = grid.face_dims(2);
        let buoy = gr.gamma * gr.s_c * prob.g_accel;
        for k in 1..m2[2] - 1 {
            for j in 0..m2[1] {
                for i in 0..m2[0] {
                    let n_face = 0.5
                        * (n_hat.data[grid.cell_idx(i, j, k - 1)]
                            + n_hat.data[grid.cell_idx(i, j, k)]);
                    mom.comp[2][grid.face_idx(2, i, j, k)] += buoy * n_face;
                }
            }
        }
        // boundary faces: Dirichlet rows
        let mom_flat = flatten_velocity(&mom);
        let off = velocity_offsets(grid);
        for d in 0..3 {
            let m = grid.face_dims(d);
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        let pos = [i, j, k][d];
                        let row = off[d] + grid.face_idx(d, i, j, k);
                        out[row] = if pos == 0 || pos == m[d] - 1 {
                            self.dscale * x[row]
                        } else {
                            mom_flat[row]
                        };
                    }
                }
            }
        }

        // continuity (+ pressure gauge)
        let div = ops::div(&u);
        for c in 0..self.nc {
            out[self.nu + c] = div.data[c] + mu_p;
        }

        // bacteria: fully implicit chemotaxis
        let mean_n = prob.sources.alpha1 / grid.measure();
        let mean_c = prob.sources.alpha2 / grid.measure();
        let mut n_full = n_hat.clone();
        for v in &mut n_full.data {
            *v += mean_n;
        }
        let mut c_full = c_hat.clone();
        for v in &mut c_full.data {
            *v += mean_c;
        }
        let lap_n = ops::laplacian_scalar(&n_hat);
        let adv_n = ops::advect_scalar(&u, &n_hat);
        let chemo = ops::chemotaxis_term(&n_full, &c_full, &prob.r, gr.chi);
        for c in 0..self.nc {
            out[self.nu + self.nc + c] = -lap_n.data[c] + adv_n.data[c] + chemo.data[c]
                - prob.sources.f_n.data[c]
                + mu_n;
        }

        // oxygen: fully implicit consumption
        let lap_c = ops::laplacian_scalar(&c_hat);
        let adv_c = ops::advect_scalar(&u, &c_hat);
        for c in 0..self.nc {
            out[self.nu + 2 * self.nc + c] = -gr.delta * lap_c.data[c] + adv_c.data[c]
                + gr.beta * prob.r.eval(c_full.data[c]) * n_full.data[c]
                - prob.sources.f_c.data[c]
                + mu_c;
        }
        if prob.oxygen_top == OxygenTopBc::Dirichlet {
            let n = grid.n;
            for k in 0..n[2] {
                for j in 0..n[1] {
                    for i in 0..n[0] {
                        let cidx = grid.cell_idx(i, j, k);
                        let mut add = 0.0;
                        if i == 0 || i == n[0] - 1 {
                            add += 2.0 * gr.delta / (grid.h[0] * grid.h[0]);
                        }
                        if j == 0 || j == n[1] - 1 {
                            add += 2.0 * gr.delta / (grid.h[1] * grid.h[1]);
                        }
                        if k == n[2] - 1 {
                            add += 2.0 * gr.delta / (grid.h[2] * grid.h[2]);
                        }
                        out[self.nu + 2 * self.nc + cidx] += add * c_hat.data[cidx];
                    }
                }
            }
        }

        // gauge rows
        let mean = |lo: usize| -> f64 {
            x[lo..lo + self.nc].iter().sum::<f64>() / self.nc as f64
        };
        out[self.nu + 3 * self.nc] = mean(self.nu);
        out[self.nu + 3 * self.nc + 1] = mean(self.nu + self.nc);
        if prob.oxygen_top == OxygenTopBc::Neumann {
            out[self.nu + 3 * self.nc + 2] = mean(self.nu + 2 * self.nc);
        }
    }
}

/// Solves the coupled discrete system by damped Newton with a dense
/// central-difference Jacobian. The oracle path: no Krylov, no lagging.
pub fn newton_oracle(
    prob: &ProblemData,
    tol: f64,
    max_iterations: usize,
) -> Result<(FieldState, NewtonOutcome)> {
    let sys = CoupledSystem::new(prob);
    let n = sys.dim();
    if n > 20_000 {
        return Err(Error::InvalidParameter {
            name: "unknowns",
            value: n as f64,
            reason: "the dense Newton oracle is limited to 20000 unknowns",
        });
    }
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut f_try = vec![0.0; n];
    sys.residual(&x, &mut f);
    let mut fnorm = norm2(&f);
    let mut iterations = 0;
    let mut converged = fnorm <= tol;
    while !converged && iterations < max_iterations {
        // dense Jacobian by central differences
        let mut jac = DenseMatrix::zeros(n, n);
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for col in 0..n {
            let step = 1e-6 * x[col].abs().max(1.0);
            let saved = x[col];
            x[col] = saved + step;
            sys.residual(&x, &mut fp);
            x[col] = saved - step;
            sys.residual(&x, &mut fm);
            x[col] = saved;
            let inv = 0.5 / step;
            for row in 0..n {
                *jac.at_mut(row, col) = (fp[row] - fm[row]) * inv;
            }
        }
        let lu = LuDecomposition::new(jac)?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs)?;
        // backtracking on the residual norm
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let x_try: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            sys.residual(&x_try, &mut f_try);
            let fn_try = norm2(&f_try);
            if fn_try < fnorm * (1.0 - 1e-4 * t) || fn_try <= tol {
                x = x_try;
                f.copy_from_slice(&f_try);
                fnorm = fn_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        converged = fnorm <= tol;
    }
    let (mut u, q, mut n_hat, mut c_hat) = sys.unpack(&x);
    u.clamp_boundary();
    let mut p = ScalarField {
        grid: prob.grid.clone(),
        data: q.data.iter().map(|v| v / prob.groups.s_c).collect(),
    };
    p.project_zero_mean();
    n_hat.project_zero_mean();
    if prob.oxygen_top == OxygenTopBc::Neumann {
        c_hat.project_zero_mean();
    }
    let state = FieldState {
        u,
        p,
        n_hat,
        c_hat,
        alpha1: prob.sources.alpha1,
        alpha2: prob.sources.alpha2,
    };
    Ok((
        state,
        NewtonOutcome {
            converged,
            iterations,
            residual: fnorm,
        },
    ))
}

/// Runs the Picard path and the monolithic Newton oracle from the zero
/// state and compares the fixed points.
pub fn oracle_equivalence(prob: &ProblemData, opts: &PicardOptions) -> Result<OracleReport> {
    let initial = FieldState::zero(&prob.grid, prob.sources.alpha1, prob.sources.alpha2);
    let picard = crate::solver::solve_stationary(initial, prob, opts, None);
    let (picard_state, picard_converged) = match picard {
        Ok((state, _, report)) => (Some(state), report.converged),
        Err(_) => (None, false),
    };
    let (newton_state, outcome) = newton_oracle(prob, 1e-12, 25)?;
    let discrepancy = match (picard_state, outcome.converged && picard_converged) {
        (Some(ps), true) => {
            let rel = |d: f64, reference: f64| d / (1.0 + reference);
            let du = rel(ps.u.scaled_diff(&newton_state.u).v_norm(), newton_state.u.v_norm());
            let dn = rel(
                ps.n_hat.scaled_diff(&newton_state.n_hat).grad_norm(),
                newton_state.n_hat.grad_norm(),
            );
            let dc = rel(
                ps.c_hat.scaled_diff(&newton_state.c_hat).grad_norm(),
                newton_state.c_hat.grad_norm(),
            );
            let dp = rel(
                ps.p.scaled_diff(&newton_state.p).l2(),
                newton_state.p.l2(),
            );
            Some(Discrepancy {
                u: du,
                n: dn,
                c: dc,
                p: dp,
                max: du.max(dn).max(dc).max(dp),
            })
        }
        _ => None,
    };
    Ok(OracleReport {
        newton: outcome,
        picard_converged,
        discrepancy,
    })
}
