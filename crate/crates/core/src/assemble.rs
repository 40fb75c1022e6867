//! Assembly of the three discrete subproblems.
//!
//! * Oseen saddle system: `(S_c (-lap) + skew advection) u - D^T q = rhs`,
//!   `D u = 0`, velocity Dirichlet rows on the boundary faces, `q = S_c p`.
//! * bacteria system: `(-lap + skew advection) n_hat = f_n - chemotaxis`,
//!   mean-constrained (pure flux structure);
//! * oxygen system: `(delta (-lap) + skew advection) c_hat = f_c - beta r n`,
//!   mean-constrained under the default all-Neumann conditions, or with a
//!   Dirichlet top layer when the upper-boundary switch is set.
//!
//! The chemotaxis and consumption coefficients are frozen at the previous
//! Picard iterate, which keeps each subproblem linear.

use std::sync::Arc;

use crate::error::Result;
use crate::grid::{MacGrid, ScalarField, VectorField};
use crate::model::{ConsumptionFunction, DimensionlessGroups};
use crate::ops;
use crate::sparse::SparseOperator;

/// Upper-boundary condition for the oxygen field. The weak form keeps a
/// boundary term there without prescribing data; the default drops it
/// (homogeneous Neumann), the alternative pins the shifted oxygen to zero
/// (i.e. `c = alpha2 / |Omega|`) on the five upper walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OxygenTopBc {
    Neumann,
    Dirichlet,
}

/// Which field's boundary conditions to apply to a stencil system.
#[derive(Debug, Clone, Copy)]
pub enum BcTarget {
    /// homogeneous Dirichlet on every boundary face; rows become identity
    /// scaled by `dscale` with zero right side
    Velocity { dscale: f64 },
    /// zero total flux (diffusive plus chemotactic) on the whole boundary;
    /// already encoded by the flux-form stencils, nothing to modify
    Bacteria,
    /// bottom Neumann always; top per the switch
    Oxygen { top: OxygenTopBc, delta: f64 },
}

/// A system in triplet form, prior to CSR compression.
pub struct StencilSystem {
    pub dim: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

/// Assembled scalar subproblem.
pub struct ScalarSystem {
    pub matrix: SparseOperator,
    pub rhs: Vec<f64>,
    /// solve with the zero-mean border when true
    pub mean_constrained: bool,
}

/// Assembled Oseen saddle problem. `q = S_c p`; callers recover the
/// physical pressure by dividing by the Schmidt number.
pub struct SaddleSystem {
    pub a: SparseOperator,
    pub div: SparseOperator,
    pub rhs: Vec<f64>,
    pub s_c: f64,
    pub dscale: f64,
}

/// Offsets of the stacked velocity unknowns `[u1 | u2 | u3]`.
pub fn velocity_offsets(grid: &MacGrid) -> [usize; 4] {
    let c0 = grid.face_count(0);
    let c1 = grid.face_count(1);
    let c2 = grid.face_count(2);
    [0, c0, c0 + c1, c0 + c1 + c2]
}

pub fn flatten_velocity(u: &VectorField) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.comp[0].len() + u.comp[1].len() + u.comp[2].len());
    for d in 0..3 {
        out.extend_from_slice(&u.comp[d]);
    }
    out
}

pub fn unflatten_velocity(grid: &Arc<MacGrid>, x: &[f64]) -> VectorField {
    let off = velocity_offsets(grid);
    let mut u = VectorField::zeros(grid);
    for d in 0..3 {
        u.comp[d].copy_from_slice(&x[off[d]..off[d + 1]]);
    }
    u
}

#[inline]
fn is_dirichlet_face(m: &[usize; 3], d: usize, i: usize, j: usize, k: usize) -> bool {
    let pos = [i, j, k][d];
    pos == 0 || pos == m[d] - 1
}

/// Applies the boundary treatment of `which` to a stencil system.
pub fn apply_boundary_conditions(
    sys: &mut StencilSystem,
    grid: &MacGrid,
    which: BcTarget,
) -> Result<()> {
    match which {
        BcTarget::Velocity { dscale } => {
            let off = velocity_offsets(grid);
            for d in 0..3 {
                let m = grid.face_dims(d);
                for k in 0..m[2] {
                    for j in 0..m[1] {
                        for i in 0..m[0] {
                            if is_dirichlet_face(&m, d, i, j, k) {
                                let row = off[d] + grid.face_idx(d, i, j, k);
                                sys.triplets.push((row, row, dscale));
                                sys.rhs[row] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        BcTarget::Bacteria => {
            // flux-form stencils already omit boundary fluxes, which is the
            // discrete statement of the zero-total-flux condition on both
            // boundary parts
        }
        BcTarget::Oxygen { top, delta } => {
            if top == OxygenTopBc::Dirichlet {
                // one-sided ghost c_ghost = 2 c_bc - c_int with c_bc the
                // shifted value 0; adds 2 delta / h^2 on the layers touching
                // the five upper walls (all except x3 = 0)
                let n = grid.n;
                for k in 0..n[2] {
                    for j in 0..n[1] {
                        for i in 0..n[0] {
                            let c = grid.cell_idx(i, j, k);
                            let mut add = 0.0;
                            if i == 0 || i == n[0] - 1 {
                                add += 2.0 * delta / (grid.h[0] * grid.h[0]);
                            }
                            if j == 0 || j == n[1] - 1 {
                                add += 2.0 * delta / (grid.h[1] * grid.h[1]);
                            }
                            if k == n[2] - 1 {
                                add += 2.0 * delta / (grid.h[2] * grid.h[2]);
                            }
                            if add != 0.0 {
                                sys.triplets.push((c, c, add));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Scalar diffusion triplets: `coeff * (-lap)` in flux form (zero-flux).
fn scalar_diffusion_triplets(grid: &MacGrid, coeff: f64, t: &mut Vec<(usize, usize, f64)>) {
    let n = grid.n;
    for d in 0..3 {
        let w = coeff / (grid.h[d] * grid.h[d]);
        let cstep = match d {
            0 => 1usize,
            1 => n[0],
            _ => n[0] * n[1],
        };
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let pos = [i, j, k][d];
                    if pos + 1 >= n[d] {
                        continue;
                    }
                    let lo = grid.cell_idx(i, j, k);
                    let hi = lo + cstep;
                    t.push((lo, lo, w));
                    t.push((lo, hi, -w));
                    t.push((hi, hi, w));
                    t.push((hi, lo, -w));
                }
            }
        }
    }
}

/// Scalar skew advection triplets for a given velocity.
fn scalar_advection_triplets(grid: &MacGrid, u: &VectorField, t: &mut Vec<(usize, usize, f64)>) {
    let n = grid.n;
    for d in 0..3 {
        let inv_2h = 0.5 / grid.h[d];
        let cstep = match d {
            0 => 1usize,
            1 => n[0],
            _ => n[0] * n[1],
        };
        let m = grid.face_dims(d);
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let pos = [i, j, k][d];
                    if pos + 1 >= n[d] {
                        continue;
                    }
                    // interior face between cells lo and hi
                    let lo = grid.cell_idx(i, j, k);
                    let hi = lo + cstep;
                    let f = grid.face_idx(d, i, j, k) + fstep;
                    let uf = u.comp[d][f] * inv_2h;
                    if uf != 0.0 {
                        t.push((lo, hi, uf));
                        t.push((hi, lo, -uf));
                    }
                }
            }
        }
    }
}

/// Builds the scalar transport operator `coeff * (-lap) + advection(u)`.
pub fn scalar_transport_matrix(
    grid: &Arc<MacGrid>,
    u: &VectorField,
    coeff: f64,
) -> SparseOperator {
    let nc = grid.cell_count();
    let mut t = Vec::with_capacity(nc * 7);
    scalar_diffusion_triplets(grid, coeff, &mut t);
    scalar_advection_triplets(grid, u, &mut t);
    SparseOperator::from_triplets(nc, nc, t)
}

/// Bacteria subproblem: the chemotaxis term is frozen at the previous
/// iterate `(n_hat_prev, c_hat_prev)` and moved to the right side.
pub fn assemble_bacteria(
    grid: &Arc<MacGrid>,
    u: &VectorField,
    n_hat_prev: &ScalarField,
    c_hat_prev: &ScalarField,
    r: &ConsumptionFunction,
    chi: f64,
    alpha1: f64,
    alpha2: f64,
    f_n: &ScalarField,
) -> Result<ScalarSystem> {
    grid.same_grid(&u.grid)?;
    grid.same_grid(&f_n.grid)?;
    let matrix = scalar_transport_matrix(grid, u, 1.0);
    let mean_n = alpha1 / grid.measure();
    let mean_c = alpha2 / grid.measure();
    let mut n_full = n_hat_prev.clone();
    for v in &mut n_full.data {
        *v += mean_n;
    }
    let mut c_full = c_hat_prev.clone();
    for v in &mut c_full.data {
        *v += mean_c;
    }
    let chemo = ops::chemotaxis_term(&n_full, &c_full, r, chi);
    let mut rhs = f_n.data.clone();
    for (rv, cv) in rhs.iter_mut().zip(&chemo.data) {
        *rv -= cv;
    }
    let mut sys = StencilSystem {
        dim: grid.cell_count(),
        triplets: Vec::new(),
        rhs: rhs.clone(),
    };
    apply_boundary_conditions(&mut sys, grid, BcTarget::Bacteria)?;
    Ok(ScalarSystem {
        matrix,
        rhs,
        mean_constrained: true,
    })
}

/// Oxygen subproblem: the consumption coefficient uses the lagged oxygen
/// inside `r` but the freshly solved bacteria field linearly.
#[allow(clippy::too_many_arguments)]
pub fn assemble_oxygen(
    grid: &Arc<MacGrid>,
    u: &VectorField,
    n_hat_new: &ScalarField,
    c_hat_prev: &ScalarField,
    r: &ConsumptionFunction,
    groups: &DimensionlessGroups,
    alpha1: f64,
    alpha2: f64,
    f_c: &ScalarField,
    top: OxygenTopBc,
) -> Result<ScalarSystem> {
    grid.same_grid(&u.grid)?;
    grid.same_grid(&f_c.grid)?;
    let delta = groups.delta;
    let beta = groups.beta;
    let mut t = Vec::with_capacity(grid.cell_count() * 7);
    scalar_diffusion_triplets(grid, delta, &mut t);
    scalar_advection_triplets(grid, u, &mut t);
    let mean_n = alpha1 / grid.measure();
    let mean_c = alpha2 / grid.measure();
    let mut rhs = f_c.data.clone();
    for idx in 0..rhs.len() {
        let c_prev_full = c_hat_prev.data[idx] + mean_c;
        let n_new_full = n_hat_new.data[idx] + mean_n;
        rhs[idx] -= beta * r.eval(c_prev_full) * n_new_full;
    }
    let mut sys = StencilSystem {
        dim: grid.cell_count(),
        triplets: t,
        rhs,
    };
    apply_boundary_conditions(&mut sys, grid, BcTarget::Oxygen { top, delta })?;
    let matrix = SparseOperator::from_triplets(sys.dim, sys.dim, sys.triplets);
    Ok(ScalarSystem {
        matrix,
        rhs: sys.rhs,
        mean_constrained: top == OxygenTopBc::Neumann,
    })
}

/// Velocity diffusion triplets `s_c * (-lap)` for the stacked unknowns,
/// interior rows only.
fn velocity_diffusion_triplets(grid: &MacGrid, s_c: f64, t: &mut Vec<(usize, usize, f64)>) {
    let off = velocity_offsets(grid);
    for d in 0..3 {
        let m = grid.face_dims(d);
        for e in 0..3 {
            let w = s_c / (grid.h[e] * grid.h[e]);
            let step = match e {
                0 => 1usize,
                1 => m[0],
                _ => m[0] * m[1],
            };
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        if is_dirichlet_face(&m, d, i, j, k) {
                            continue;
                        }
                        let row = off[d] + grid.face_idx(d, i, j, k);
                        let pos = [i, j, k][e];
                        if e == d {
                            t.push((row, row, 2.0 * w));
                            // neighbors along own axis; boundary faces are
                            // zero-valued, so their entries are dropped
                            if pos > 1 {
                                t.push((row, row - step, -w));
                            }
                            if pos + 2 < m[e] {
                                t.push((row, row + step, -w));
                            }
                        } else {
                            let at_low = pos == 0;
                            let at_high = pos == m[e] - 1;
                            // reflection ghost turns -1 neighbor weight into
                            // +1 on the diagonal
                            let diag = 2.0 + (at_low as usize as f64) + (at_high as usize as f64);
                            t.push((row, row, diag * w));
                            if !at_low {
                                t.push((row, row - step, -w));
                            }
                            if !at_high {
                                t.push((row, row + step, -w));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Velocity skew advection triplets at the frozen field `u_prev`.
fn velocity_advection_triplets(
    grid: &MacGrid,
    u_prev: &VectorField,
    t: &mut Vec<(usize, usize, f64)>,
) {
    let off = velocity_offsets(grid);
    for d in 0..3 {
        let m = grid.face_dims(d);
        for e in 0..3 {
            let inv_2h = 0.5 / grid.h[e];
            let step = match e {
                0 => 1usize,
                1 => m[0],
                _ => m[0] * m[1],
            };
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        if is_dirichlet_face(&m, d, i, j, k) {
                            continue;
                        }
                        let row = off[d] + grid.face_idx(d, i, j, k);
                        let pos = [i, j, k][e];
                        if let Some(ubar) = crate::ops::interface_velocity(u_prev, d, e, i, j, k, true)
                        {
                            if pos + 1 < m[e] {
                                let col = row + step;
                                // drop entries into Dirichlet faces: value 0
                                let target_is_dirichlet = e == d && pos + 1 == m[d] - 1;
                                if !target_is_dirichlet && ubar != 0.0 {
                                    t.push((row, col, ubar * inv_2h));
                                }
                            }
                        }
                        if let Some(ubar) =
                            crate::ops::interface_velocity(u_prev, d, e, i, j, k, false)
                        {
                            if pos > 0 {
                                let col = row - step;
                                let target_is_dirichlet = e == d && pos - 1 == 0;
                                if !target_is_dirichlet && ubar != 0.0 {
                                    t.push((row, col, -ubar * inv_2h));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Divergence operator over interior faces (columns at boundary faces stay
/// empty: those unknowns are pinned to zero).
pub fn divergence_matrix(grid: &Arc<MacGrid>) -> SparseOperator {
    let off = velocity_offsets(grid);
    let nc = grid.cell_count();
    let nu = off[3];
    let mut t = Vec::with_capacity(nc * 6);
    for d in 0..3 {
        let m = grid.face_dims(d);
        let inv_h = 1.0 / grid.h[d];
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    let c = grid.cell_idx(i, j, k);
                    let f_lo = grid.face_idx(d, i, j, k);
                    let f_hi = f_lo + fstep;
                    let pos = [i, j, k][d];
                    if pos > 0 {
                        t.push((c, off[d] + f_lo, -inv_h));
                    }
                    if pos + 1 < grid.n[d] {
                        t.push((c, off[d] + f_hi, inv_h));
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(nc, nu, t)
}

/// Oseen saddle system linearized at `u_prev` with buoyancy from the
/// current shifted bacteria field: rhs = `gamma S_c n_hat g + F` where
/// `g = (0,0,-g)`.
pub fn assemble_oseen(
    grid: &Arc<MacGrid>,
    u_prev: &VectorField,
    n_hat: &ScalarField,
    groups: &DimensionlessGroups,
    g_accel: f64,
    force: &VectorField,
) -> Result<SaddleSystem> {
    grid.same_grid(&u_prev.grid)?;
    grid.same_grid(&n_hat.grid)?;
    grid.same_grid(&force.grid)?;
    let s_c = groups.s_c;
    let off = velocity_offsets(grid);
    let nu = off[3];
    let dscale =
        s_c * 2.0 * (1.0 / (grid.h[0] * grid.h[0]) + 1.0 / (grid.h[1] * grid.h[1]) + 1.0 / (grid.h[2] * grid.h[2]));
    let mut t = Vec::with_capacity(nu * 8);
    velocity_diffusion_triplets(grid, s_c, &mut t);
    velocity_advection_triplets(grid, u_prev, &mut t);

    // right side: external force everywhere, buoyancy on interior z-faces
    let mut rhs = flatten_velocity(force);
    let m2 = grid.face_dims(2);
    let buoy = -groups.gamma * s_c * g_accel;
    for k in 1..m2[2] - 1 {
        for j in 0..m2[1] {
            for i in 0..m2[0] {
                let n_face = 0.5
                    * (n_hat.data[grid.cell_idx(i, j, k - 1)] + n_hat.data[grid.cell_idx(i, j, k)]);
                rhs[off[2] + grid.face_idx(2, i, j, k)] += buoy * n_face;
            }
        }
    }

    let mut sys = StencilSystem {
        dim: nu,
        triplets: t,
        rhs,
    };
    apply_boundary_conditions(&mut sys, grid, BcTarget::Velocity { dscale })?;
    let a = SparseOperator::from_triplets(nu, nu, sys.triplets);
    debug_assert!(a.diagonal().iter().all(|&d| d > 0.0), "positive diagonal");
    Ok(SaddleSystem {
        a,
        div: divergence_matrix(grid),
        rhs: sys.rhs,
        s_c,
        dscale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bacteria_operator_annihilates_constants() {
        // constant n, c with chi = 0: pure Neumann structure, the operator
        // row sums vanish to machine precision
        let g = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = VectorField::random_solenoidal(&g, &mut rng);
        let a = scalar_transport_matrix(&g, &u, 1.0);
        let ones = vec![1.0; g.cell_count()];
        let mut out = vec![0.0; g.cell_count()];
        a.matvec(&ones, &mut out);
        let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-10, "row action on constants = {max}");
        // and column sums are exactly telescoping
        let mut col = vec![0.0; g.cell_count()];
        a.matvec_transpose(&ones, &mut col);
        let maxc = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(maxc < 1e-11, "column action on constants = {maxc}");
    }

    #[test]
    fn velocity_boundary_rows_are_identity() {
        let g = MacGrid::cube(1.0, 4);
        let groups = DimensionlessGroups {
            s_c: 2.0,
            gamma: 0.0,
            chi: 0.1,
            delta: 1.0,
            beta: 0.1,
        };
        let sys = assemble_oseen(
            &g,
            &VectorField::zeros(&g),
            &ScalarField::zeros(&g),
            &groups,
            1.0,
            &VectorField::zeros(&g),
        )
        .unwrap();
        let off = velocity_offsets(&g);
        for d in 0..3 {
            let m = g.face_dims(d);
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        if is_dirichlet_face(&m, d, i, j, k) {
                            let row = off[d] + g.face_idx(d, i, j, k);
                            let lo = sys.a.row_ptr[row];
                            let hi = sys.a.row_ptr[row + 1];
                            assert_eq!(hi - lo, 1, "boundary row must be identity");
                            assert_eq!(sys.a.col_idx[lo], row);
                            assert_eq!(sys.a.values[lo], sys.dscale);
                            assert_eq!(sys.rhs[row], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn oseen_matrix_matches_matrix_free_operators() {
        let g = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u_prev = VectorField::random_solenoidal(&g, &mut rng);
        let groups = DimensionlessGroups {
            s_c: 1.5,
            gamma: 0.0,
            chi: 0.1,
            delta: 1.0,
            beta: 0.1,
        };
        let sys = assemble_oseen(
            &g,
            &u_prev,
            &ScalarField::zeros(&g),
            &groups,
            1.0,
            &VectorField::zeros(&g),
        )
        .unwrap();
        let w = VectorField::random_solenoidal(&g, &mut rng);
        let x = flatten_velocity(&w);
        let mut ax = vec![0.0; x.len()];
        sys.a.matvec(&x, &mut ax);
        let mut expect = ops::laplacian_velocity(&w);
        for d in 0..3 {
            for v in &mut expect.comp[d] {
                *v *= -groups.s_c;
            }
        }
        let adv = ops::advect_velocity(&u_prev, &w);
        expect.axpy(1.0, &adv);
        let ex = flatten_velocity(&expect);
        let off = velocity_offsets(&g);
        for d in 0..3 {
            let m = g.face_dims(d);
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        if is_dirichlet_face(&m, d, i, j, k) {
                            continue;
                        }
                        let idx = off[d] + g.face_idx(d, i, j, k);
                        assert!(
                            (ax[idx] - ex[idx]).abs() < 1e-10 * (1.0 + ex[idx].abs()),
                            "row {idx}: csr {} vs op {}",
                            ax[idx],
                            ex[idx]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn divergence_matrix_matches_operator() {
        let g = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = VectorField::random_solenoidal(&g, &mut rng);
        let d = divergence_matrix(&g);
        let x = flatten_velocity(&u);
        let mut out = vec![0.0; g.cell_count()];
        d.matvec(&x, &mut out);
        let reference = ops::div(&u);
        for c in 0..g.cell_count() {
            assert!((out[c] - reference.data[c]).abs() < 1e-11);
        }
    }

    #[test]
    fn buoyancy_points_downward() {
        // a positive bacteria excess forces the fluid along -x3
        let g = MacGrid::cube(1.0, 4);
        let groups = DimensionlessGroups {
            s_c: 1.0,
            gamma: 2.0,
            chi: 0.1,
            delta: 1.0,
            beta: 0.1,
        };
        let mut n_hat = ScalarField::zeros(&g);
        n_hat.data[g.cell_idx(1, 1, 1)] = 1.0;
        let sys = assemble_oseen(
            &g,
            &VectorField::zeros(&g),
            &n_hat,
            &groups,
            9.81,
            &VectorField::zeros(&g),
        )
        .unwrap();
        let off = velocity_offsets(&g);
        let f = off[2] + g.face_idx(2, 1, 1, 1);
        assert!(sys.rhs[f] < 0.0);
        let fup = off[2] + g.face_idx(2, 1, 1, 2);
        assert!(sys.rhs[fup] < 0.0);
    }

    #[test]
    fn oxygen_dirichlet_top_strengthens_diagonal() {
        let g = MacGrid::cube(1.0, 4);
        let groups = DimensionlessGroups {
            s_c: 1.0,
            gamma: 1.0,
            chi: 0.1,
            delta: 2.0,
            beta: 0.5,
        };
        let r = ConsumptionFunction::bump(1.0, 0.25).unwrap();
        let z = ScalarField::zeros(&g);
        let u = VectorField::zeros(&g);
        let neu = assemble_oxygen(
            &g, &u, &z, &z, &r, &groups, 0.5, 0.5, &z, OxygenTopBc::Neumann,
        )
        .unwrap();
        let dir = assemble_oxygen(
            &g, &u, &z, &z, &r, &groups, 0.5, 0.5, &z, OxygenTopBc::Dirichlet,
        )
        .unwrap();
        assert!(neu.mean_constrained);
        assert!(!dir.mean_constrained);
        let dn = neu.matrix.diagonal();
        let dd = dir.matrix.diagonal();
        let corner = g.cell_idx(0, 0, 3); // touches three upper walls
        let h2 = g.h[0] * g.h[0];
        assert!((dd[corner] - dn[corner] - 3.0 * 2.0 * groups.delta / h2).abs() < 1e-12);
        let bottom_center = g.cell_idx(1, 1, 0); // touches only the bottom
        assert_eq!(dd[bottom_center], dn[bottom_center]);
    }
}
