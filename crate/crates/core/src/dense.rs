//! Dense row-major matrices with a pivoted LU factorization. This is the
//! direct oracle the iterative solvers and the monolithic Newton path are
//! checked against; it is not meant for large systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> DenseMatrix {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let row = &self.data[r * self.ncols..(r + 1) * self.ncols];
            y[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// LU with partial pivoting, in place. Returns the pivot permutation.
    pub fn lu_factor(&mut self) -> Result<Vec<usize>> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // pivot search
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for r in (k + 1)..n {
                let v = self.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularSystem {
                    detail: format!("zero pivot at column {k} (smallest pivot 0)"),
                });
            }
            if p != k {
                piv.swap(k, p);
                for c in 0..n {
                    self.data.swap(k * n + c, p * n + c);
                }
            }
            let pivot = self.at(k, k);
            for r in (k + 1)..n {
                let m = self.at(r, k) / pivot;
                *self.at_mut(r, k) = m;
                if m != 0.0 {
                    let (upper, lower) = self.data.split_at_mut(r * n);
                    let krow = &upper[k * n + k + 1..k * n + n];
                    let rrow = &mut lower[k + 1..n];
                    for (rv, kv) in rrow.iter_mut().zip(krow) {
                        *rv -= m * kv;
                    }
                }
            }
        }
        Ok(piv)
    }

    pub fn lu_solve(&self, piv: &[usize], b: &[f64], x: &mut [f64]) {
        let n = self.nrows;
        for (i, &p) in piv.iter().enumerate() {
            x[i] = b[p];
        }
        // forward substitution (unit lower)
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.at(r, c) * x[c];
            }
            x[r] = acc;
        }
        // back substitution
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= self.at(r, c) * x[c];
            }
            x[r] = acc / self.at(r, r);
        }
    }

    pub fn smallest_pivot(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.at(i, i).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Factorized system kept around for repeated right-hand sides.
pub struct LuDecomposition {
    factors: DenseMatrix,
    pivots: Vec<usize>,
    original: DenseMatrix,
}

impl LuDecomposition {
    pub fn new(m: DenseMatrix) -> Result<LuDecomposition> {
        let original = m.clone();
        let mut factors = m;
        let pivots = factors.lu_factor()?;
        Ok(LuDecomposition {
            factors,
            pivots,
            original,
        })
    }

    /// Solve with one step of iterative refinement, then enforce the
    /// residual contract `||b - Ax|| <= 1e-11 ||b||`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.factors.nrows;
        let mut x = vec![0.0; n];
        self.factors.lu_solve(&self.pivots, b, &mut x);
        let mut r = vec![0.0; n];
        let mut dx = vec![0.0; n];
        for _ in 0..2 {
            self.original.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            self.factors.lu_solve(&self.pivots, &r, &mut dx);
            for i in 0..n {
                x[i] += dx[i];
            }
        }
        self.original.matvec(&x, &mut r);
        let bnorm = norm2(b);
        let mut rnorm = 0.0;
        for i in 0..n {
            let d = b[i] - r[i];
            rnorm += d * d;
        }
        let rnorm = rnorm.sqrt();
        if bnorm > 0.0 && rnorm > 1e-11 * bnorm {
            return Err(Error::SingularSystem {
                detail: format!(
                    "direct solve residual {:.3e} exceeds 1e-11 (smallest pivot {:.3e})",
                    rnorm / bnorm,
                    self.factors.smallest_pivot()
                ),
            });
        }
        Ok(x)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let mut m = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            *m.at_mut(i, i) = 1.0;
        }
        let lu = LuDecomposition::new(m).unwrap();
        let b = vec![1.0, -2.0, 3.0, 4.0];
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn hilbert_like_still_meets_residual_contract() {
        // kappa ~ 1e13: the solution error is large, but the residual
        // contract is enforced regardless
        let n = 10;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *m.at_mut(i, j) = 1.0 / (1 + i + j) as f64;
            }
        }
        let mut b = vec![0.0; n];
        m.matvec(&vec![1.0; n], &mut b);
        let lu = LuDecomposition::new(m.clone()).unwrap();
        let x = lu.solve(&b).unwrap();
        let mut ax = vec![0.0; n];
        m.matvec(&x, &mut ax);
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-11 * norm2(&b));
    }

    #[test]
    fn random_100_verified_by_residual() {
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *m.at_mut(i, j) = rng.gen_range(-1.0..1.0);
            }
            *m.at_mut(i, i) += 4.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lu = LuDecomposition::new(m.clone()).unwrap();
        let x = lu.solve(&b).unwrap();
        let mut ax = vec![0.0; n];
        m.matvec(&x, &mut ax);
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-12 * norm2(&b));
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let mut m = DenseMatrix::zeros(3, 3);
        *m.at_mut(0, 0) = 1.0;
        *m.at_mut(1, 1) = 1.0;
        // third row all zero
        assert!(LuDecomposition::new(m).is_err());
    }
}
