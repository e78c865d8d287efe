//! Restarted GMRES with ILU(0) preconditioning, the optional iterative
//! backend for the nonsymmetric inner systems.

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::state::norm2;

/// Zero-fill incomplete LU factorization on the CSR pattern.
pub struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(op: &SparseOperator) -> Result<Self> {
        let n = op.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(op.nnz());
        let mut values = Vec::with_capacity(op.nnz());
        row_ptr.push(0);
        let mut row = 0;
        for (r, c, v) in op.triplets() {
            while row < r {
                row_ptr.push(col_idx.len());
                row += 1;
            }
            col_idx.push(c);
            values.push(v);
        }
        while row < n {
            row_ptr.push(col_idx.len());
            row += 1;
        }
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in row_ptr[r]..row_ptr[r + 1] {
                if col_idx[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::SingularFactorization {
                    column: r,
                    pivot: 0.0,
                });
            }
        }

        let find = |row_ptr: &[usize], col_idx: &[usize], r: usize, c: usize| -> Option<usize> {
            let lo = row_ptr[r];
            let hi = row_ptr[r + 1];
            col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
        };

        for i in 0..n {
            for kk in row_ptr[i]..row_ptr[i + 1] {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let dk = values[diag[k]];
                if dk == 0.0 {
                    return Err(Error::SingularFactorization {
                        column: k,
                        pivot: dk,
                    });
                }
                let lik = values[kk] / dk;
                values[kk] = lik;
                for jj in (diag[k] + 1)..row_ptr[k + 1] {
                    let j = col_idx[jj];
                    if let Some(idx) = find(&row_ptr, &col_idx, i, j) {
                        values[idx] -= lik * values[jj];
                    }
                }
            }
        }

        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// Applies the preconditioner, solving `L U z = r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = r.to_vec();
        // forward, unit lower triangle
        for i in 0..self.n {
            let mut acc = z[i];
            for k in self.row_ptr[i]..self.diag[i] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc;
        }
        // backward, upper triangle with diagonal
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for k in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc / self.values[self.diag[i]];
        }
        z
    }
}

#[derive(Clone, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iter: 2000,
            tol_abs: 1e-12,
            tol_rel: 1e-12,
        }
    }
}

/// Right-preconditioned restarted GMRES, `A M^{-1} w = b`, `x = M^{-1} w`.
pub fn gmres_ilu(op: &SparseOperator, rhs: &[f64], opts: &GmresOptions) -> Result<Vec<f64>> {
    let n = op.n();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let prec = Ilu0::factor(op)?;
    let tol = opts.tol_abs + opts.tol_rel * norm2(rhs);
    let m = opts.restart.max(1);
    let mut x = vec![0.0; n];
    let mut total = 0usize;
    let mut last_res = f64::INFINITY;

    while total < opts.max_iter {
        // true residual at (re)start
        let ax = op.matvec(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        last_res = beta;
        if beta <= tol {
            return Ok(x);
        }
        for v in &mut r {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut j_used = 0;

        for j in 0..m {
            total += 1;
            let z = prec.apply(&basis[j]);
            let mut w = op.matvec(&z);
            // modified Gram-Schmidt
            for (i, vi) in basis.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hj1 = norm2(&w);
            h[j + 1][j] = hj1;
            // previous Givens rotations
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            // new rotation zeroing h[j+1][j]
            let denom = (h[j][j] * h[j][j] + hj1 * hj1).sqrt();
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = hj1 / denom;
            }
            h[j][j] = cs[j] * h[j][j] + sn[j] * hj1;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            j_used = j + 1;
            last_res = g[j + 1].abs();

            if hj1 != 0.0 {
                basis.push(w.iter().map(|v| v / hj1).collect());
            }
            if last_res <= tol || hj1 == 0.0 || total >= opts.max_iter {
                break;
            }
        }

        // back-substitution for the least-squares coefficients
        let k = j_used;
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in (i + 1)..k {
                acc -= h[i][l] * y[l];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![0.0f64; n];
        for (l, yl) in y.iter().enumerate() {
            for (uk, vk) in update.iter_mut().zip(&basis[l]) {
                *uk += yl * vk;
            }
        }
        let z = prec.apply(&update);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if last_res <= tol {
            return Ok(x);
        }
    }

    Err(Error::KrylovDidNotConverge {
        iterations: total,
        residual: last_res,
    })
}
