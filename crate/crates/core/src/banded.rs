//! Banded LU factorization with partial pivoting.
//!
//! The Q1 stencil keeps the assembled operators inside a narrow band
//! (half-bandwidth `nx` for lexicographic interior numbering), so a
//! band factorization in LAPACK `dgbtrf` storage is the direct solver
//! of choice. Partial pivoting widens the upper band by the lower
//! bandwidth; storage is `(2 kl + ku + 1) x n`, column-major, with
//! entry `(i, j)` at band row `kl + ku + i - j`.
//!
//! Solves with the factored matrix and with its transpose share one
//! factorization; the transpose solve is what makes the discrete
//! adjoint the exact transpose of the linearized state operator.

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    /// widened upper bandwidth, `ku + kl`
    kw: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factors a CSR operator. Fails on an exactly zero pivot column.
    pub fn factor(op: &SparseOperator) -> Result<Self> {
        let n = op.n();
        let (kl, ku) = op.bandwidths();
        let kw = ku + kl;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for (i, j, v) in op.triplets() {
            ab[j * ldab + (kl + ku + i - j)] = v;
        }
        let mut ipiv = vec![0usize; n];

        let idx = |i: usize, j: usize| j * ldab + (kl + ku + i - j);
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in (j + 1)..=(j + km) {
                let v = ab[idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if best == 0.0 {
                return Err(Error::SingularFactorization {
                    column: j,
                    pivot: best,
                });
            }
            let jmax = (j + kw).min(n - 1);
            if p != j {
                for c in j..=jmax {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let piv = ab[idx(j, j)];
            for i in (j + 1)..=(j + km) {
                let m = ab[idx(i, j)] / piv;
                ab[idx(i, j)] = m;
                if m != 0.0 {
                    for c in (j + 1)..=jmax {
                        ab[idx(i, c)] -= m * ab[idx(j, c)];
                    }
                }
            }
        }

        Ok(Self {
            n,
            kl,
            kw,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + (self.kw + i - j)]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let n = self.n;
        // P^T b: apply interchanges in factorization order
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
        }
        // forward: L (unit diagonal, multipliers stored below)
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let imax = (j + self.kl).min(n - 1);
                for i in (j + 1)..=imax {
                    x[i] -= self.at(i, j) * xj;
                }
            }
        }
        // backward: U
        for j in (0..n).rev() {
            x[j] /= self.at(j, j);
            let xj = x[j];
            if xj != 0.0 {
                let imin = j.saturating_sub(self.kw);
                for i in imin..j {
                    x[i] -= self.at(i, j) * xj;
                }
            }
        }
        x
    }

    /// Solves `A^T x = b` with the same factorization
    /// (`A^T = U^T L^T P^T`).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let n = self.n;
        // U^T y = b (U^T is lower triangular)
        for j in 0..n {
            let imin = j.saturating_sub(self.kw);
            let mut acc = x[j];
            for i in imin..j {
                acc -= self.at(i, j) * x[i];
            }
            x[j] = acc / self.at(j, j);
        }
        // L^T z = y (L^T is unit upper triangular)
        for j in (0..n).rev() {
            let imax = (j + self.kl).min(n - 1);
            let mut acc = x[j];
            for i in (j + 1)..=imax {
                acc -= self.at(i, j) * x[i];
            }
            x[j] = acc;
        }
        // x = P z: interchanges in reverse order
        for j in (0..n).rev() {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
        }
        x
    }
}
