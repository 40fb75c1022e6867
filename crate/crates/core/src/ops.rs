//! Matrix-free MAC differential operators.
//!
//! Conventions baked into every stencil:
//! * scalars obey zero-flux boundary conditions in flux form: boundary face
//!   fluxes are simply omitted, which encodes both the bottom Neumann
//!   condition and the flux-balance condition on the remaining walls;
//! * velocities vanish on the boundary; normal components are stored on the
//!   wall faces and pinned to zero, tangential components use the no-slip
//!   reflection ghost `u_ghost = -u_inner`;
//! * advection is discretized in the split (skew) form, whose stencil
//!   reduces to `[u_+ w_+ - u_- w_-$] / 2h`. The induced bilinear forms are
//!   exactly antisymmetric whenever the advecting field has zero normal
//!   trace, which is the discrete counterpart of the energy identities the
//!   a-priori estimates rest on.

use crate::grid::{ScalarField, VectorField};
use crate::model::ConsumptionFunction;

/// Cell-centered gradient sampled on interior faces; boundary faces get 0.
pub fn grad(s: &ScalarField) -> VectorField {
    let g = &s.grid;
    let mut out = VectorField::zeros(g);
    for d in 0..3 {
        let m = g.face_dims(d);
        let inv_h = 1.0 / g.h[d];
        let cstep = match d {
            0 => 1usize,
            1 => g.n[0],
            _ => g.n[0] * g.n[1],
        };
        for k in 0..m[2] {
            for j in 0..m[1] {
                for i in 0..m[0] {
                    let pos = [i, j, k][d];
                    if pos == 0 || pos == m[d] - 1 {
                        continue;
                    }
                    let (ci, cj, ck) = match d {
                        0 => (i - 1, j, k),
                        1 => (i, j - 1, k),
                        _ => (i, j, k - 1),
                    };
                    let left = g.cell_idx(ci, cj, ck);
                    out.comp[d][g.face_idx(d, i, j, k)] =
                        (s.data[left + cstep] - s.data[left]) * inv_h;
                }
            }
        }
    }
    out
}

/// Discrete divergence at cell centers, using all faces (boundary faces of
/// admissible fields are zero).
pub fn div(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let mut out = ScalarField::zeros(g);
    for d in 0..3 {
        let m = g.face_dims(d);
        let inv_h = 1.0 / g.h[d];
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let f = g.face_idx(d, i, j, k);
                    out.data[g.cell_idx(i, j, k)] +=
                        (v.comp[d][f + fstep] - v.comp[d][f]) * inv_h;
                }
            }
        }
    }
    out
}

/// Seven-point scalar Laplacian in flux form with zero-flux boundaries.
/// Equals `div(grad(s))` with boundary fluxes omitted.
pub fn laplacian_scalar(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let mut out = ScalarField::zeros(g);
    for d in 0..3 {
        let inv_h2 = 1.0 / (g.h[d] * g.h[d]);
        let cstep = match d {
            0 => 1usize,
            1 => g.n[0],
            _ => g.n[0] * g.n[1],
        };
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let pos = [i, j, k][d];
                    let c = g.cell_idx(i, j, k);
                    let mut acc = 0.0;
                    if pos + 1 < g.n[d] {
                        acc += s.data[c + cstep] - s.data[c];
                    }
                    if pos > 0 {
                        acc -= s.data[c] - s.data[c - cstep];
                    }
                    out.data[c] += acc * inv_h2;
                }
            }
        }
    }
    out
}

/// Component-wise velocity Laplacian with no-slip walls. Boundary normal
/// faces produce zero rows (they are Dirichlet-pinned elsewhere).
pub fn laplacian_velocity(u: &VectorField) -> VectorField {
    let g = &u.grid;
    let mut out = VectorField::zeros(g);
    for d in 0..3 {
        let m = g.face_dims(d);
        for e in 0..3 {
            let inv_h2 = 1.0 / (g.h[e] * g.h[e]);
            let step = match e {
                0 => 1usize,
                1 => m[0],
                _ => m[0] * m[1],
            };
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        let nd = [i, j, k][d];
                        if nd == 0 || nd == m[d] - 1 {
                            continue; // Dirichlet face, handled as identity row
                        }
                        let idx = g.face_idx(d, i, j, k);
                        let v = u.comp[d][idx];
                        let pos = [i, j, k][e];
                        let mut acc = 0.0;
                        if e == d {
                            // neighbors along own axis always exist
                            acc += u.comp[d][idx + step] - 2.0 * v + u.comp[d][idx - step];
                        } else {
                            let upper = if pos + 1 < m[e] {
                                u.comp[d][idx + step]
                            } else {
                                -v // reflection ghost across the wall
                            };
                            let lower = if pos > 0 {
                                u.comp[d][idx - step]
                            } else {
                                -v
                            };
                            acc += upper - 2.0 * v + lower;
                        }
                        out.comp[d][idx] += acc * inv_h2;
                    }
                }
            }
        }
    }
    out
}

/// Split-form scalar advection `u . grad(s)` at cell centers:
/// `sum_d [u_+ s_+ - u_- s_-] / (2 h_d)` with wall faces dropped.
pub fn advect_scalar(u: &VectorField, s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    debug_assert!(u.grid.same_grid(g).is_ok());
    let mut out = ScalarField::zeros(g);
    for d in 0..3 {
        let m = g.face_dims(d);
        let inv_2h = 0.5 / g.h[d];
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        let cstep = match d {
            0 => 1usize,
            1 => g.n[0],
            _ => g.n[0] * g.n[1],
        };
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let pos = [i, j, k][d];
                    let c = g.cell_idx(i, j, k);
                    let f = g.face_idx(d, i, j, k);
                    let mut acc = 0.0;
                    if pos + 1 < g.n[d] {
                        acc += u.comp[d][f + fstep] * s.data[c + cstep];
                    }
                    if pos > 0 {
                        acc -= u.comp[d][f] * s.data[c - cstep];
                    }
                    out.data[c] += acc * inv_2h;
                }
            }
        }
    }
    out
}

/// Interpolates the advecting component `e` to the `plus`-side interface of
/// the control volume of component `d` at face (i,j,k). Returns `None` for
/// interfaces lying on a wall (where the normal advecting velocity is zero).
#[inline]
pub(crate) fn interface_velocity(
    u: &VectorField,
    d: usize,
    e: usize,
    i: usize,
    j: usize,
    k: usize,
    plus: bool,
) -> Option<f64> {
    let g = &u.grid;
    if e == d {
        // interface at a cell center along the component's own axis
        let m = g.face_dims(d);
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        let idx = g.face_idx(d, i, j, k);
        Some(if plus {
            0.5 * (u.comp[d][idx] + u.comp[d][idx + fstep])
        } else {
            0.5 * (u.comp[d][idx] + u.comp[d][idx - fstep])
        })
    } else {
        // interface at an edge; average the two e-faces straddling it in d
        let pos_e = [i, j, k][e];
        let target_e = if plus { pos_e + 1 } else { pos_e };
        let me = g.face_dims(e);
        if target_e == 0 || target_e == me[e] {
            return None; // edge on a wall: hard zero
        }
        // the two cells adjacent to face (i,j,k) along d are d-indices
        // (pos_d - 1) and pos_d
        let pos_d = [i, j, k][d];
        let mut a = [i, j, k];
        a[e] = target_e;
        a[d] = pos_d - 1;
        let mut b = [i, j, k];
        b[e] = target_e;
        b[d] = pos_d;
        Some(
            0.5 * (u.comp[e][g.face_idx(e, a[0], a[1], a[2])]
                + u.comp[e][g.face_idx(e, b[0], b[1], b[2])]),
        )
    }
}

/// Split-form velocity advection `(u . grad) w` on the staggered layout.
/// Rows at boundary normal faces are zero.
pub fn advect_velocity(u: &VectorField, w: &VectorField) -> VectorField {
    let g = &w.grid;
    debug_assert!(u.grid.same_grid(g).is_ok());
    let mut out = VectorField::zeros(g);
    for d in 0..3 {
        let m = g.face_dims(d);
        for e in 0..3 {
            let inv_2h = 0.5 / g.h[e];
            let step = match e {
                0 => 1usize,
                1 => m[0],
                _ => m[0] * m[1],
            };
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        let nd = [i, j, k][d];
                        if nd == 0 || nd == m[d] - 1 {
                            continue;
                        }
                        let idx = g.face_idx(d, i, j, k);
                        let pos = [i, j, k][e];
                        let mut acc = 0.0;
                        if let Some(ubar) = interface_velocity(u, d, e, i, j, k, true) {
                            if pos + 1 < m[e] {
                                acc += ubar * w.comp[d][idx + step];
                            }
                            // w beyond a wall in a tangential direction is
                            // only reachable when ubar = 0, excluded above
                        }
                        if let Some(ubar) = interface_velocity(u, d, e, i, j, k, false) {
                            if pos > 0 {
                                acc -= ubar * w.comp[d][idx - step];
                            }
                        }
                        out.comp[d][idx] += acc * inv_2h;
                    }
                }
            }
        }
    }
    out
}

/// Conservative chemotaxis operator `chi * div(n r(c) grad c)` with zero
/// boundary fluxes; `n` and `c` are the unshifted fields. Face values use
/// the arithmetic average of `n` and of `r(c)`.
pub fn chemotaxis_term(
    n: &ScalarField,
    c: &ScalarField,
    r: &ConsumptionFunction,
    chi: f64,
) -> ScalarField {
    let g = &n.grid;
    debug_assert!(c.grid.same_grid(g).is_ok());
    let mut out = ScalarField::zeros(g);
    if chi == 0.0 {
        return out;
    }
    for d in 0..3 {
        let inv_h = 1.0 / g.h[d];
        let cstep = match d {
            0 => 1usize,
            1 => g.n[0],
            _ => g.n[0] * g.n[1],
        };
        // flux through the interior face between cells `c` and `c + cstep`
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let pos = [i, j, k][d];
                    if pos + 1 >= g.n[d] {
                        continue;
                    }
                    let lo = g.cell_idx(i, j, k);
                    let hi = lo + cstep;
                    let n_face = 0.5 * (n.data[lo] + n.data[hi]);
                    let r_face = 0.5 * (r.eval(c.data[lo]) + r.eval(c.data[hi]));
                    let flux = chi * n_face * r_face * (c.data[hi] - c.data[lo]) * inv_h;
                    out.data[lo] += flux * inv_h;
                    out.data[hi] -= flux * inv_h;
                }
            }
        }
    }
    out
}

/// The exact discrete boundary term of summation by parts:
/// `<grad s, v> + <s, div v> = sum over wall faces of s_adj * v * nu * area`.
pub fn sbp_boundary_term(s: &ScalarField, v: &VectorField) -> f64 {
    let g = &s.grid;
    let mut acc = 0.0;
    for d in 0..3 {
        let m = g.face_dims(d);
        let area = g.vol() / g.h[d];
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let pos = [i, j, k][d];
                    if pos == 0 {
                        let mut f = [i, j, k];
                        f[d] = 0;
                        acc -= s.data[g.cell_idx(i, j, k)]
                            * v.comp[d][g.face_idx(d, f[0], f[1], f[2])]
                            * area;
                    }
                    if pos == g.n[d] - 1 {
                        let mut f = [i, j, k];
                        f[d] = m[d] - 1;
                        acc += s.data[g.cell_idx(i, j, k)]
                            * v.comp[d][g.face_idx(d, f[0], f[1], f[2])]
                            * area;
                    }
                }
            }
        }
    }
    acc
}

/// Resamples face data to cell centers (for visualization output).
pub fn face_to_cell(u: &VectorField) -> [ScalarField; 3] {
    let g = &u.grid;
    let mut out = [
        ScalarField::zeros(g),
        ScalarField::zeros(g),
        ScalarField::zeros(g),
    ];
    for d in 0..3 {
        let m = g.face_dims(d);
        let fstep = match d {
            0 => 1usize,
            1 => m[0],
            _ => m[0] * m[1],
        };
        for k in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let f = g.face_idx(d, i, j, k);
                    out[d].data[g.cell_idx(i, j, k)] =
                        0.5 * (u.comp[d][f] + u.comp[d][f + fstep]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MacGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_of_constant_vanishes() {
        let g = MacGrid::cube(1.0, 6);
        let s = ScalarField::constant(&g, 3.7);
        let gr = grad(&s);
        assert_eq!(gr.max_abs(), 0.0);
    }

    #[test]
    fn div_of_linear_solenoidal_field_vanishes() {
        let g = MacGrid::cube(1.0, 8);
        // v = (x, -y, 0) sampled on faces; exactly divergence-free
        let v = VectorField::from_fn(&g, |d, p| match d {
            0 => p[0],
            1 => -p[1],
            _ => 0.0,
        });
        let dv = div(&v);
        assert!(dv.max_abs() < 1e-13);
    }

    #[test]
    fn scalar_laplacian_exact_on_quadratic_interior() {
        let g = MacGrid::cube(1.0, 8);
        let s = ScalarField::from_fn(&g, |p| p[0] * p[0]);
        let lap = laplacian_scalar(&s);
        // interior cells only: the stencil is exact on quadratics
        for k in 0..8 {
            for j in 0..8 {
                for i in 1..7 {
                    let v = lap.data[g.cell_idx(i, j, k)];
                    assert!((v - 2.0).abs() < 1e-10, "lap = {v} at ({i},{j},{k})");
                }
            }
        }
    }

    #[test]
    fn div_grad_equals_scalar_laplacian_interior() {
        let g = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ScalarField::zeros(&g);
        for v in &mut s.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        let via_ops = div(&grad(&s));
        let lap = laplacian_scalar(&s);
        for k in 1..5 {
            for j in 1..5 {
                for i in 1..5 {
                    let c = g.cell_idx(i, j, k);
                    assert!((via_ops.data[c] - lap.data[c]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let g = MacGrid::cube(1.0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = ScalarField::zeros(&g);
        for v in &mut s.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        // arbitrary v, including nonzero boundary faces
        let mut v = VectorField::zeros(&g);
        for d in 0..3 {
            for val in &mut v.comp[d] {
                *val = rng.gen_range(-1.0..1.0);
            }
        }
        let lhs = grad(&s).dot(&v) + s.dot(&div(&v));
        let rhs = sbp_boundary_term(&s, &v);
        assert!(
            (lhs - rhs).abs() < 1e-13,
            "sbp identity broke: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn advection_by_zero_velocity_is_zero() {
        let g = MacGrid::cube(1.0, 6);
        let u = VectorField::zeros(&g);
        let s = ScalarField::from_fn(&g, |p| p[0] + p[1] * p[2]);
        assert_eq!(advect_scalar(&u, &s).max_abs(), 0.0);
        let w = VectorField::from_fn(&g, |d, p| if d == 0 { p[1] } else { 0.0 });
        assert_eq!(advect_velocity(&u, &w).max_abs(), 0.0);
    }

    #[test]
    fn scalar_advection_of_constant_vanishes_for_solenoidal_u() {
        let g = MacGrid::cube(1.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = VectorField::random_solenoidal(&g, &mut rng);
        let s = ScalarField::constant(&g, 2.5);
        let a = advect_scalar(&u, &s);
        assert!(a.max_abs() < 1e-12 * u.max_abs() / g.h[0]);
    }

    #[test]
    fn scalar_advection_is_skew() {
        let g = MacGrid::cube(1.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = VectorField::random_solenoidal(&g, &mut rng);
        let mut s = ScalarField::zeros(&g);
        let mut t = ScalarField::zeros(&g);
        for v in &mut s.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut t.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        let b_st = advect_scalar(&u, &s).dot(&t);
        let b_ts = advect_scalar(&u, &t).dot(&s);
        let scale = u.max_abs() * s.l2() * t.l2() / g.h[0];
        assert!((b_st + b_ts).abs() <= 1e-12 * scale);
        let b_ss = advect_scalar(&u, &s).dot(&s);
        assert!(b_ss.abs() <= 1e-12 * u.max_abs() * s.l2() * s.l2() / g.h[0]);
    }

    #[test]
    fn velocity_advection_is_skew() {
        let g = MacGrid::cube(1.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = VectorField::random_solenoidal(&g, &mut rng);
        let v = VectorField::random_solenoidal(&g, &mut rng);
        let w = VectorField::random_solenoidal(&g, &mut rng);
        let b_vw = advect_velocity(&u, &v).dot(&w);
        let b_wv = advect_velocity(&u, &w).dot(&v);
        let scale = u.max_abs() * v.l2() * w.l2() / g.h[0];
        assert!((b_vw + b_wv).abs() <= 1e-12 * scale, "{b_vw} vs {b_wv}");
        let b_vv = advect_velocity(&u, &v).dot(&v);
        assert!(b_vv.abs() <= 1e-12 * u.max_abs() * v.l2() * v.l2() / g.h[0]);
    }

    #[test]
    fn chemotaxis_zero_cases() {
        let g = MacGrid::cube(1.0, 6);
        let r = crate::model::ConsumptionFunction::bump(1.0, 0.25).unwrap();
        let n = ScalarField::zeros(&g);
        let c = ScalarField::from_fn(&g, |p| p[2]);
        assert_eq!(chemotaxis_term(&n, &c, &r, 0.7).max_abs(), 0.0);
        let n = ScalarField::constant(&g, 1.0);
        let c = ScalarField::constant(&g, 0.5);
        assert_eq!(chemotaxis_term(&n, &c, &r, 0.7).max_abs(), 0.0);
    }

    #[test]
    fn chemotaxis_total_is_conserved() {
        let g = MacGrid::cube(1.0, 8);
        let r = crate::model::ConsumptionFunction::bump(1.0, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut n = ScalarField::zeros(&g);
        let mut c = ScalarField::zeros(&g);
        for v in &mut n.data {
            *v = rng.gen_range(0.0..1.0);
        }
        for v in &mut c.data {
            *v = rng.gen_range(0.0..1.0);
        }
        let q = chemotaxis_term(&n, &c, &r, 0.9);
        assert!(q.total().abs() < 1e-12 * q.max_abs().max(1.0));
    }
}
