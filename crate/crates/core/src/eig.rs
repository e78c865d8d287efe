//! Eigenvalue helpers: shift-invert iteration for the smallest
//! generalized eigenvalue of a symmetric pencil and a matrix-free
//! Lanczos bound for reduced-Hessian Rayleigh quotients.

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::state::norm2;

/// Gershgorin interval of a sparse matrix,
/// `(min_i a_ii - r_i, max_i a_ii + r_i)`.
pub fn gershgorin_bounds(op: &SparseOperator) -> (f64, f64) {
    let n = op.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut diag = vec![0.0; n];
    let mut radius = vec![0.0; n];
    for (r, c, v) in op.triplets() {
        if r == c {
            diag[r] = v;
        } else {
            radius[r] += v.abs();
        }
    }
    for i in 0..n {
        lo = lo.min(diag[i] - radius[i]);
        hi = hi.max(diag[i] + radius[i]);
    }
    (lo, hi)
}

/// Options for [`smallest_generalized`].
#[derive(Clone, Copy, Debug)]
pub struct PencilOptions {
    /// Certified strict lower bound on the smallest eigenvalue, when the
    /// caller knows one (skips the Gershgorin estimate).
    pub certified_shift: Option<f64>,
    /// Positive lower bound on `lambda_min(B)` when known; improves the
    /// Gershgorin-based shift for non-diagonally-dominant `B`.
    pub b_lambda_min: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self {
            certified_shift: None,
            b_lambda_min: None,
            max_iter: 400,
            tol: 1e-13,
        }
    }
}

/// Smallest eigenvalue (and an eigenvector) of the generalized problem
/// `A x = lambda B x` with `A` symmetric and `B` symmetric positive
/// definite, by shift-invert power iteration on `(A - sigma B)^{-1} B`
/// with one adaptive re-shift.
pub fn smallest_generalized(
    a: &SparseOperator,
    b: &SparseOperator,
    opts: &PencilOptions,
) -> Result<(f64, Vec<f64>)> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.n(),
        });
    }

    let shift0 = match opts.certified_shift {
        Some(s) => s,
        None => {
            let (ga_lo, _) = gershgorin_bounds(a);
            let (gb_lo, gb_hi) = gershgorin_bounds(b);
            let b_min = opts.b_lambda_min.unwrap_or(gb_lo);
            if !(b_min > 0.0) {
                return Err(Error::EigenSolveFailed(
                    "no positive lower bound available for lambda_min(B); supply b_lambda_min"
                        .into(),
                ));
            }
            let bound = if ga_lo <= 0.0 {
                ga_lo / b_min
            } else {
                ga_lo / gb_hi.max(b_min)
            };
            bound - 0.01 * (1.0 + bound.abs())
        }
    };

    let (theta1, x1) = shift_invert_phase(a, b, shift0, opts)?;
    // re-shift just below the estimate for a fast second phase
    let shift1 = theta1 - 1e-4 * (1.0 + theta1.abs());
    let refined = shift_invert_phase(a, b, shift1, opts);
    match refined {
        Ok((theta2, x2)) if theta2 <= theta1 + 1e-9 * (1.0 + theta1.abs()) => Ok((theta2, x2)),
        _ => Ok((theta1, x1)),
    }
}

fn shift_invert_phase(
    a: &SparseOperator,
    b: &SparseOperator,
    shift: f64,
    opts: &PencilOptions,
) -> Result<(f64, Vec<f64>)> {
    let n = a.n();
    let shifted = a.add_scaled(-shift, b)?;
    let lu = BandedLu::factor(&shifted)?;
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.3 * (2.37 * i as f64 + 0.5).sin())
        .collect();
    normalize_b(b, &mut x);
    let mut theta_prev = f64::INFINITY;
    let mut theta = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let bx = b.matvec(&x);
        let mut z = lu.solve(&bx);
        normalize_b(b, &mut z);
        let az = a.matvec(&z);
        let bz = b.matvec(&z);
        let num: f64 = z.iter().zip(&az).map(|(p, q)| p * q).sum();
        let den: f64 = z.iter().zip(&bz).map(|(p, q)| p * q).sum();
        theta = num / den;
        x = z;
        if iter >= 4 && (theta - theta_prev).abs() <= opts.tol * (1.0 + theta.abs()) {
            break;
        }
        theta_prev = theta;
    }
    if !theta.is_finite() {
        return Err(Error::EigenSolveFailed(format!(
            "shift-invert iteration diverged at shift {shift}"
        )));
    }
    Ok((theta, x))
}

fn normalize_b(b: &SparseOperator, x: &mut [f64]) {
    let bx = b.matvec(x);
    let norm: f64 = x.iter().zip(&bx).map(|(p, q)| p * q).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
}

/// Smallest Ritz value of a self-adjoint operator in a caller-supplied
/// inner product, via Lanczos with full reorthogonalization. `apply`
/// must be self-adjoint with respect to `inner`.
pub fn lanczos_smallest(
    start: Vec<f64>,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    inner: impl Fn(&[f64], &[f64]) -> f64,
    max_steps: usize,
) -> Result<f64> {
    let norm = |v: &[f64]| inner(v, v).max(0.0).sqrt();
    let mut v = start;
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(Error::EigenSolveFailed("Lanczos start vector is zero".into()));
    }
    for x in v.iter_mut() {
        *x /= n0;
    }
    let mut basis = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for step in 0..max_steps {
        let mut w = apply(&basis[step]);
        let alpha = inner(&w, &basis[step]);
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for q in &basis {
                let c = inner(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm(&w);
        if beta <= 1e-13 * alphas.iter().fold(1.0f64, |m, a| m.max(a.abs())) {
            break;
        }
        if step + 1 == max_steps {
            break;
        }
        betas.push(beta);
        for wi in w.iter_mut() {
            *wi /= beta;
        }
        basis.push(w);
    }

    debug_assert_eq!(betas.len() + 1, alphas.len());
    Ok(tridiag_smallest(&alphas, &betas))
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm
/// bisection.
pub fn tridiag_smallest(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    assert!(n >= 1 && off.len() + 1 == n);
    // Gershgorin bracket
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    if n == 1 {
        return diag[0];
    }
    // count of eigenvalues below x via the LDL^T sign recurrence
    let count_below = |x: f64| -> usize {
        let mut cnt = 0;
        let mut d = 1.0f64;
        for i in 0..n {
            let offsq = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - offsq / d;
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut a = lo - 1e-12 * (1.0 + lo.abs());
    let mut b = hi + 1e-12 * (1.0 + hi.abs());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if count_below(mid) >= 1 {
            b = mid;
        } else {
            a = mid;
        }
        if (b - a) <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Euclidean residual `|A x - lambda B x|` of a generalized eigenpair,
/// for diagnostics.
pub fn pencil_residual(a: &SparseOperator, b: &SparseOperator, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let bx = b.matvec(x);
    let r: Vec<f64> = ax
        .iter()
        .zip(&bx)
        .map(|(p, q)| p - lambda * q)
        .collect();
    norm2(&r) / norm2(x).max(1e-300)
}
