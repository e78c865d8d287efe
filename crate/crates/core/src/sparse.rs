//! Compressed-row sparse operators on interior dofs.
//!
//! Every assembled matrix lives on the 9-point Q1 stencil of the grid,
//! so all operators produced by one grid share an identical sparsity
//! pattern. That makes linear combinations, transposition and the
//! symmetric part cheap pattern-preserving operations.

use crate::error::{Error, Result};
use crate::grid::UniformGrid;

#[derive(Clone, Debug)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Zero operator on the interior dofs of `grid` with the 9-point Q1
    /// stencil pattern (pairs of interior nodes sharing an element).
    pub fn q1_pattern(grid: &UniformGrid) -> Self {
        let dofs = grid.dof_map();
        let n = dofs.n_dofs();
        let nx = grid.nx() as isize;
        let ny = grid.ny() as isize;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in 0..n {
            let (ix, iy) = dofs.node(row);
            let mut cols: Vec<usize> = Vec::with_capacity(9);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let jx = ix as isize + dx;
                    let jy = iy as isize + dy;
                    if jx >= 1 && jx < nx && jy >= 1 && jy < ny {
                        cols.push(dofs.dof(jx as usize, jy as usize).unwrap());
                    }
                }
            }
            cols.sort_unstable();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            symmetric: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn set_symmetric(&mut self, flag: bool) {
        self.symmetric = flag;
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .binary_search(&col)
            .ok()
            .map(|k| lo + k)
    }

    /// Accumulates `v` into entry `(row, col)`; the pair must belong to
    /// the stencil pattern.
    pub(crate) fn add_entry(&mut self, row: usize, col: usize, v: f64) {
        let k = self
            .slot(row, col)
            .expect("assembly wrote outside the Q1 stencil");
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[row] = acc;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for row in 0..self.n {
            let xr = x[row];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        x.iter().zip(&ax).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// `self + alpha * other`; both operands must share the pattern.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_same_pattern(other)?;
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += alpha * w;
        }
        out.symmetric = self.symmetric && other.symmetric;
        Ok(out)
    }

    fn check_same_pattern(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::invalid(
                "sparse operators have different sparsity patterns",
            ));
        }
        Ok(())
    }

    /// Right-multiplication by a diagonal: `(A D)_{ij} = A_{ij} d_j`.
    pub fn scale_columns(&self, d: &[f64]) -> Self {
        debug_assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for row in 0..self.n {
            for k in out.row_ptr[row]..out.row_ptr[row + 1] {
                out.values[k] *= d[out.col_idx[k]];
            }
        }
        out.symmetric = false;
        out
    }

    /// Transpose. The stencil pattern is structurally symmetric, so the
    /// result shares the pattern.
    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k];
                let kt = out
                    .slot(col, row)
                    .expect("stencil pattern must be structurally symmetric");
                out.values[kt] = self.values[k];
            }
        }
        out
    }

    /// `(A + A^T) / 2`, flagged symmetric.
    pub fn symmetric_part(&self) -> Self {
        let t = self.transpose();
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&t.values) {
            *v = 0.5 * (*v + *w);
        }
        out.symmetric = true;
        out
    }

    /// Largest deviation from symmetry, `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.values
            .iter()
            .zip(&t.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k];
                if col < row {
                    kl = kl.max(row - col);
                } else {
                    ku = ku.max(col - row);
                }
            }
        }
        (kl, ku)
    }

    /// Iterates stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |row| {
            (self.row_ptr[row]..self.row_ptr[row + 1])
                .map(move |k| (row, self.col_idx[k], self.values[k]))
        })
    }

    /// Row sum vector, `A 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|row| self.values[self.row_ptr[row]..self.row_ptr[row + 1]].iter().sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectDomain;

    fn grid(nx: usize, ny: usize) -> UniformGrid {
        UniformGrid::new(RectDomain::unit_square(), nx, ny).unwrap()
    }

    #[test]
    fn stencil_pattern_size() {
        // 4x4 grid: 9 interior dofs, corner dofs have 4 neighbours,
        // edge dofs 6, the center 9.
        let op = SparseOperator::q1_pattern(&grid(4, 4));
        assert_eq!(op.n(), 9);
        assert_eq!(op.nnz(), 4 * 4 + 4 * 6 + 9);
    }

    #[test]
    fn transpose_roundtrip_and_asymmetry() {
        let mut op = SparseOperator::q1_pattern(&grid(4, 4));
        op.add_entry(0, 1, 2.0);
        op.add_entry(1, 0, -1.0);
        op.add_entry(4, 4, 3.0);
        let t = op.transpose();
        assert_eq!(t.get(1, 0), 2.0);
        assert_eq!(t.get(0, 1), -1.0);
        assert_eq!(t.get(4, 4), 3.0);
        assert!((op.asymmetry() - 3.0).abs() < 1e-15);
        let s = op.symmetric_part();
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(1, 0), 0.5);
    }

    #[test]
    fn matvec_transpose_consistent() {
        let mut op = SparseOperator::q1_pattern(&grid(5, 4));
        // fill with a deterministic nonsymmetric pattern
        let n = op.n();
        for row in 0..n {
            for col in 0..n {
                if op.slot(row, col).is_some() {
                    op.add_entry(row, col, ((row * 7 + col * 3) % 11) as f64 - 5.0);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..n).map(|i| (i as f64 * 0.53).cos()).collect();
        let ax = op.matvec(&x);
        let atw = op.matvec_transpose(&w);
        let lhs: f64 = w.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&atw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn bandwidth_of_stencil() {
        let op = SparseOperator::q1_pattern(&grid(6, 5));
        let (kl, ku) = op.bandwidths();
        // neighbour dof offsets reach (nx - 1) + 1 = nx
        assert_eq!(kl, 6);
        assert_eq!(ku, 6);
    }
}
