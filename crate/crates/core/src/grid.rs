//! Staggered (MAC) grid and the discrete fields living on it.
//!
//! Scalars (`p`, `n`, `c`, sources) sit at cell centers; the velocity
//! component `u_d` sits on faces orthogonal to axis `d`, including the
//! boundary faces, where the normal velocity is pinned to zero. All inner
//! products weigh every degree of freedom with the cell volume, which makes
//! the discrete gradient and negative divergence exact adjoints of each
//! other.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Marker-and-cell grid over the box `[0,L1] x [0,L2] x [0,L3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacGrid {
    /// cells per axis
    pub n: [usize; 3],
    /// spacings `L_i / n_i`
    pub h: [f64; 3],
    /// edge lengths
    pub len: [f64; 3],
}

impl MacGrid {
    pub fn new(len: [f64; 3], n: [usize; 3]) -> Result<Arc<MacGrid>> {
        for d in 0..3 {
            if n[d] < 4 {
                return Err(Error::InvalidParameter {
                    name: "grid.cells",
                    value: n[d] as f64,
                    reason: "at least 4 cells per axis are required",
                });
            }
            if !(len[d] > 0.0) || !len[d].is_finite() {
                return Err(Error::InvalidParameter {
                    name: "domain.edges",
                    value: len[d],
                    reason: "edge lengths must be positive and finite",
                });
            }
        }
        let h = [len[0] / n[0] as f64, len[1] / n[1] as f64, len[2] / n[2] as f64];
        Ok(Arc::new(MacGrid { n, h, len }))
    }

    /// Uniform cube helper used all over the tests.
    pub fn cube(len: f64, n: usize) -> Arc<MacGrid> {
        MacGrid::new([len, len, len], [n, n, n]).expect("valid cube grid")
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Cell volume `h1*h2*h3`, the quadrature weight of every unknown.
    #[inline]
    pub fn vol(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// `|Omega|`.
    #[inline]
    pub fn measure(&self) -> f64 {
        self.len[0] * self.len[1] * self.len[2]
    }

    /// Dimensions of the face grid of velocity component `d`.
    #[inline]
    pub fn face_dims(&self, d: usize) -> [usize; 3] {
        let mut m = self.n;
        m[d] += 1;
        m
    }

    #[inline]
    pub fn face_count(&self, d: usize) -> usize {
        let m = self.face_dims(d);
        m[0] * m[1] * m[2]
    }

    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    #[inline]
    pub fn face_idx(&self, d: usize, i: usize, j: usize, k: usize) -> usize {
        let m = self.face_dims(d);
        (k * m[1] + j) * m[0] + i
    }

    /// Center of cell (i,j,k).
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 + 0.5) * self.h[0],
            (j as f64 + 0.5) * self.h[1],
            (k as f64 + 0.5) * self.h[2],
        ]
    }

    /// Position of face (i,j,k) of component `d`.
    #[inline]
    pub fn face_center(&self, d: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut p = self.cell_center(i, j, k);
        p[d] = match d {
            0 => i as f64 * self.h[0],
            1 => j as f64 * self.h[1],
            _ => k as f64 * self.h[2],
        };
        p
    }

    pub fn same_grid(&self, other: &MacGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: format!("{:?} @ {:?}", self.n, self.len),
                found: format!("{:?} @ {:?}", other.n, other.len),
            })
        }
    }
}

/// Neumaier compensated sum; keeps mean projections near one ulp.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Cell-centered scalar field.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<MacGrid>,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<MacGrid>) -> ScalarField {
        ScalarField {
            grid: grid.clone(),
            data: vec![0.0; grid.cell_count()],
        }
    }

    pub fn from_fn<F: Fn([f64; 3]) -> f64>(grid: &Arc<MacGrid>, f: F) -> ScalarField {
        let mut s = ScalarField::zeros(grid);
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    s.data[grid.cell_idx(i, j, k)] = f(grid.cell_center(i, j, k));
                }
            }
        }
        s
    }

    pub fn constant(grid: &Arc<MacGrid>, v: f64) -> ScalarField {
        ScalarField {
            grid: grid.clone(),
            data: vec![v; grid.cell_count()],
        }
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(&self.data) / self.data.len() as f64
    }

    /// Discrete integral over the box.
    pub fn total(&self) -> f64 {
        compensated_sum(&self.data) * self.grid.vol()
    }

    /// Subtracts the mean, then mops the residual sum into a single entry.
    /// The computed mean lands at the summation rounding floor (~1e-16 of
    /// the field scale per element), below which per-element corrections
    /// round to no-ops.
    pub fn project_zero_mean(&mut self) {
        for _ in 0..3 {
            let m = self.mean();
            if m == 0.0 {
                return;
            }
            for v in &mut self.data {
                *v -= m;
            }
        }
        let s = compensated_sum(&self.data);
        if s != 0.0 && !self.data.is_empty() {
            self.data[0] -= s;
        }
    }

    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.vol()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// H1 seminorm: L2 norm of the interior-face gradient. This is the norm
    /// of the zero-mean spaces used by the a-priori estimates.
    pub fn grad_norm(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for d in 0..3 {
            let inv_h = 1.0 / g.h[d];
            let step = match d {
                0 => 1,
                1 => g.n[0],
                _ => g.n[0] * g.n[1],
            };
            for k in 0..g.n[2] {
                for j in 0..g.n[1] {
                    for i in 0..g.n[0] {
                        let hi = [i, j, k][d];
                        if hi + 1 >= g.n[d] {
                            continue;
                        }
                        let c = g.cell_idx(i, j, k);
                        let diff = (self.data[c + step] - self.data[c]) * inv_h;
                        acc += diff * diff;
                    }
                }
            }
        }
        (acc * g.vol()).sqrt()
    }

    /// Full H1 norm, `sqrt(L2^2 + |grad|^2)`.
    pub fn h1_norm(&self) -> f64 {
        let l2 = self.l2();
        let g = self.grad_norm();
        (l2 * l2 + g * g).sqrt()
    }

    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        for (v, xv) in self.data.iter_mut().zip(&x.data) {
            *v += a * xv;
        }
    }

    pub fn scaled_diff(&self, other: &ScalarField) -> ScalarField {
        let mut d = self.clone();
        d.axpy(-1.0, other);
        d
    }
}

/// Face-staggered vector field; component `d` holds `(n_d + 1)` planes of
/// faces along axis `d`, boundary faces included.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<MacGrid>,
    pub comp: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: &Arc<MacGrid>) -> VectorField {
        VectorField {
            grid: grid.clone(),
            comp: [
                vec![0.0; grid.face_count(0)],
                vec![0.0; grid.face_count(1)],
                vec![0.0; grid.face_count(2)],
            ],
        }
    }

    /// Samples three component functions at the face centers. The caller is
    /// responsible for profiles that vanish on the boundary when the field
    /// is meant to be admissible.
    pub fn from_fn<F: Fn(usize, [f64; 3]) -> f64>(grid: &Arc<MacGrid>, f: F) -> VectorField {
        let mut u = VectorField::zeros(grid);
        for d in 0..3 {
            let m = grid.face_dims(d);
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        u.comp[d][grid.face_idx(d, i, j, k)] =
                            f(d, grid.face_center(d, i, j, k));
                    }
                }
            }
        }
        u
    }

    /// Zeroes the boundary normal faces (no-penetration).
    pub fn clamp_boundary(&mut self) {
        let g = self.grid.clone();
        for d in 0..3 {
            let m = g.face_dims(d);
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        let on_wall = [i, j, k][d] == 0 || [i, j, k][d] == m[d] - 1;
                        if on_wall {
                            self.comp[d][g.face_idx(d, i, j, k)] = 0.0;
                        }
                    }
                }
            }
        }
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            s += self.comp[d]
                .iter()
                .zip(&other.comp[d])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        s * self.grid.vol()
    }

    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comp
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, a: f64, x: &VectorField) {
        for d in 0..3 {
            for (v, xv) in self.comp[d].iter_mut().zip(&x.comp[d]) {
                *v += a * xv;
            }
        }
    }

    pub fn scaled_diff(&self, other: &VectorField) -> VectorField {
        let mut d = self.clone();
        d.axpy(-1.0, other);
        d
    }

    /// Discrete Dirichlet energy norm (the V-norm): gradient samples along
    /// the component's own axis use the stored boundary faces, gradients
    /// towards tangential walls use the no-slip reflection ghost, which adds
    /// `2 u^2 / h^2` per wall-adjacent value. Matches the quadratic form of
    /// the velocity Laplacian exactly.
    pub fn v_norm(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for d in 0..3 {
            let m = g.face_dims(d);
            for e in 0..3 {
                let inv_h = 1.0 / g.h[e];
                let step = match e {
                    0 => 1usize,
                    1 => m[0],
                    _ => m[0] * m[1],
                };
                for k in 0..m[2] {
                    for j in 0..m[1] {
                        for i in 0..m[0] {
                            let idx = g.face_idx(d, i, j, k);
                            let pos = [i, j, k][e];
                            let v = self.comp[d][idx];
                            if e == d {
                                // normal direction: plain consecutive differences
                                if pos + 1 < m[e] {
                                    let diff = (self.comp[d][idx + step] - v) * inv_h;
                                    acc += diff * diff;
                                }
                            } else {
                                if pos + 1 < m[e] {
                                    let diff = (self.comp[d][idx + step] - v) * inv_h;
                                    acc += diff * diff;
                                }
                                // reflection ghost at tangential walls
                                if pos == 0 {
                                    acc += 2.0 * v * v * inv_h * inv_h;
                                }
                                if pos == m[e] - 1 {
                                    acc += 2.0 * v * v * inv_h * inv_h;
                                }
                            }
                        }
                    }
                }
            }
        }
        (acc * g.vol()).sqrt()
    }

    /// Random discretely divergence-free field with zero normal trace,
    /// built as the discrete curl of edge potentials that vanish on the
    /// boundary planes. `div_h(curl_h psi) = 0` holds to machine precision.
    pub fn random_solenoidal<R: Rng>(grid: &Arc<MacGrid>, rng: &mut R) -> VectorField {
        let g = grid;
        let n = g.n;
        // edge potential dims: psi_d is centered along axis d, nodal in the others
        let edge_dims = |d: usize| -> [usize; 3] {
            let mut m = [n[0] + 1, n[1] + 1, n[2] + 1];
            m[d] = n[d];
            m
        };
        let mut psi: [Vec<f64>; 3] = [vec![], vec![], vec![]];
        for d in 0..3 {
            let m = edge_dims(d);
            let mut v = vec![0.0; m[0] * m[1] * m[2]];
            for k in 0..m[2] {
                for j in 0..m[1] {
                    for i in 0..m[0] {
                        // zero on any boundary plane the edge lies in
                        let mut on_boundary = false;
                        for e in 0..3 {
                            if e != d {
                                let pos = [i, j, k][e];
                                if pos == 0 || pos == m[e] - 1 {
                                    on_boundary = true;
                                }
                            }
                        }
                        if !on_boundary {
                            v[(k * m[1] + j) * m[0] + i] = rng.gen_range(-1.0..1.0);
                        }
                    }
                }
            }
            psi[d] = v;
        }
        let eidx = |d: usize, i: usize, j: usize, k: usize| -> usize {
            let m = edge_dims(d);
            (k * m[1] + j) * m[0] + i
        };
        let mut u = VectorField::zeros(grid);
        // u = curl(psi)
        let m0 = g.face_dims(0);
        for k in 0..m0[2] {
            for j in 0..m0[1] {
                for i in 0..m0[0] {
                    let val = (psi[2][eidx(2, i, j + 1, k)] - psi[2][eidx(2, i, j, k)]) / g.h[1]
                        - (psi[1][eidx(1, i, j, k + 1)] - psi[1][eidx(1, i, j, k)]) / g.h[2];
                    u.comp[0][g.face_idx(0, i, j, k)] = val;
                }
            }
        }
        let m1 = g.face_dims(1);
        for k in 0..m1[2] {
            for j in 0..m1[1] {
                for i in 0..m1[0] {
                    let val = (psi[0][eidx(0, i, j, k + 1)] - psi[0][eidx(0, i, j, k)]) / g.h[2]
                        - (psi[2][eidx(2, i + 1, j, k)] - psi[2][eidx(2, i, j, k)]) / g.h[0];
                    u.comp[1][g.face_idx(1, i, j, k)] = val;
                }
            }
        }
        let m2 = g.face_dims(2);
        for k in 0..m2[2] {
            for j in 0..m2[1] {
                for i in 0..m2[0] {
                    let val = (psi[1][eidx(1, i + 1, j, k)] - psi[1][eidx(1, i, j, k)]) / g.h[0]
                        - (psi[0][eidx(0, i, j + 1, k)] - psi[0][eidx(0, i, j, k)]) / g.h[1];
                    u.comp[2][g.face_idx(2, i, j, k)] = val;
                }
            }
        }
        u
    }
}
