//! Semilinear state solves.
//!
//! The discrete state equation is `K y + F(y) = D u` with
//! `K = K_diff + N` and the nodally interpolated nonlinear load `F`.
//! The default solver is a damped Newton iteration whose Jacobian
//! `K + M diag(f'(y))` is the exact derivative of the residual; on
//! stagnation it falls back to a Picard iteration on the truncated
//! nonlinearity `f_k(x, y) = f(x, proj_[-k,k](y))`, mirroring the
//! truncation argument that gives well-posedness in the first place.

use serde::{Deserialize, Serialize};

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::krylov::{gmres_ilu, GmresOptions};
use crate::problem::Discretization;
use crate::sparse::SparseOperator;

/// Linear solver backend for the inner systems.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearSolver {
    /// Banded LU with partial pivoting (default).
    Direct,
    /// Restarted GMRES preconditioned with ILU(0).
    GmresIlu { restart: usize, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

#[derive(Clone, Debug)]
pub struct StateOptions {
    /// Absolute residual tolerance in the Euclidean dof norm.
    pub tol_state: f64,
    pub max_newton: usize,
    pub armijo_c: f64,
    pub armijo_factor: f64,
    pub min_step: f64,
    /// Under-relaxation of the truncated Picard iteration, in (0, 1].
    pub picard_relaxation: f64,
    pub picard_max: usize,
    pub linear: LinearSolver,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self {
            tol_state: 1e-10,
            max_newton: 30,
            armijo_c: 1e-4,
            armijo_factor: 0.5,
            min_step: (2.0f64).powi(-20),
            picard_relaxation: 1.0,
            picard_max: 400,
            linear: LinearSolver::Direct,
        }
    }
}

/// Outcome bookkeeping of an iterative solve, also carried inside
/// non-convergence errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub damping_history: Vec<f64>,
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "converged={}, iterations={}, final_residual={:.3e}",
            self.converged, self.iterations, self.final_residual
        )
    }
}

/// Converged discrete state.
#[derive(Clone, Debug)]
pub struct StateSolution {
    pub y: ScalarField,
    pub residual_norm: f64,
    /// Linear solves performed, counting the initial anchor solve.
    pub newton_iterations: usize,
    pub globalization_used: bool,
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `op x = rhs` with the default direct backend and verifies the
/// residual contract `|op x - rhs| <= 1e-10 max(1, |rhs|)`.
pub fn solve_linear(op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    solve_linear_with(op, rhs, &LinearSolver::Direct)
}

pub fn solve_linear_with(op: &SparseOperator, rhs: &[f64], solver: &LinearSolver) -> Result<Vec<f64>> {
    if rhs.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            found: rhs.len(),
        });
    }
    let bound = 1e-10 * norm2(rhs).max(1.0);
    let mut x = match solver {
        LinearSolver::Direct => {
            let lu = BandedLu::factor(op)?;
            let mut x = lu.solve(rhs);
            // one step of iterative refinement keeps the contract on
            // badly scaled systems
            for _ in 0..2 {
                let r = residual_vec(op, &x, rhs);
                if norm2(&r) <= bound {
                    break;
                }
                let dx = lu.solve(&r);
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi -= di;
                }
            }
            x
        }
        LinearSolver::GmresIlu { restart, max_iter } => {
            let opts = GmresOptions {
                restart: *restart,
                max_iter: *max_iter,
                tol_abs: 0.1 * bound,
                tol_rel: 0.0,
            };
            gmres_ilu(op, rhs, &opts)?
        }
    };
    let r = residual_vec(op, &x, rhs);
    let rn = norm2(&r);
    if rn > bound {
        // final refinement attempt before giving up
        if let LinearSolver::Direct = solver {
            return Err(Error::LinearSolveInaccurate {
                residual: rn,
                bound,
            });
        }
        let lu = BandedLu::factor(op)?;
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= di;
        }
        let rn2 = norm2(&residual_vec(op, &x, rhs));
        if rn2 > bound {
            return Err(Error::LinearSolveInaccurate {
                residual: rn2,
                bound,
            });
        }
    }
    Ok(x)
}

fn residual_vec(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = op.matvec(x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri -= bi;
    }
    r
}

/// Damped Newton iteration on the discrete semilinear residual.
///
/// The initial iterate solves the linear problem with `f` dropped.
/// Backtracking accepts `y + t d` once the residual norm satisfies the
/// Armijo-type decrease `|R| <= (1 - c t) |R_old|`; on line-search
/// stagnation or iteration exhaustion the truncated Picard fallback is
/// tried with level `k = 10 (1 + |u|_inf)`.
pub fn solve_state_newton(
    disc: &Discretization,
    u: &ScalarField,
    opts: &StateOptions,
) -> Result<StateSolution> {
    solve_state_newton_from(disc, u, None, opts)
}

/// Newton solve with an optional warm-start iterate.
pub fn solve_state_newton_from(
    disc: &Discretization,
    u: &ScalarField,
    warm: Option<&ScalarField>,
    opts: &StateOptions,
) -> Result<StateSolution> {
    check_field(disc, u)?;
    if let Some(y0) = warm {
        check_field(disc, y0)?;
    }
    let load = disc.control_load(u);
    let mut damping_history = Vec::new();

    let mut y = match warm {
        Some(y0) => y0.clone(),
        None => {
            let anchor = solve_linear_with(disc.linear_op(), load.values(), &opts.linear)?;
            ScalarField::like(u, anchor)
        }
    };
    let mut iterations = 1; // the anchor (or warm start) counts as one solve
    let mut r = disc.state_residual(&y, &load)?;
    let mut rnorm = norm2(&r);

    while rnorm > opts.tol_state {
        if iterations > opts.max_newton {
            return fallback(disc, u, opts, iterations, rnorm, damping_history);
        }
        let kop = disc.linearized_operator(&y)?;
        for v in &mut r {
            *v = -*v;
        }
        // a degenerate linearization is stagnation, not a hard failure
        let delta = match solve_linear_with(&kop, &r, &opts.linear) {
            Ok(d) => d,
            Err(
                Error::SingularFactorization { .. }
                | Error::LinearSolveInaccurate { .. }
                | Error::KrylovDidNotConverge { .. },
            ) => return fallback(disc, u, opts, iterations, rnorm, damping_history),
            Err(e) => return Err(e),
        };
        let delta = ScalarField::like(&y, delta);

        let mut t = 1.0;
        let mut accepted = false;
        while t >= opts.min_step {
            let trial = y.add_scaled(t, &delta);
            let r_trial = disc.state_residual(&trial, &load)?;
            let rn_trial = norm2(&r_trial);
            if rn_trial <= (1.0 - opts.armijo_c * t) * rnorm {
                y = trial;
                r = r_trial;
                rnorm = rn_trial;
                accepted = true;
                break;
            }
            t *= opts.armijo_factor;
        }
        if !accepted {
            return fallback(disc, u, opts, iterations, rnorm, damping_history);
        }
        damping_history.push(t);
        iterations += 1;
    }

    Ok(StateSolution {
        y,
        residual_norm: rnorm,
        newton_iterations: iterations,
        globalization_used: false,
    })
}

fn fallback(
    disc: &Discretization,
    u: &ScalarField,
    opts: &StateOptions,
    iterations: usize,
    rnorm: f64,
    damping_history: Vec<f64>,
) -> Result<StateSolution> {
    let level = 10.0 * (1.0 + u.linf_norm());
    match solve_state_truncated(disc, u, level, opts) {
        Ok(mut sol) => {
            sol.globalization_used = true;
            sol.newton_iterations += iterations;
            Ok(sol)
        }
        Err(_) => Err(Error::StateSolveFailed {
            report: SolveReport {
                converged: false,
                iterations,
                final_residual: rnorm,
                damping_history,
            },
        }),
    }
}

/// Picard iteration on the truncated equation
/// `K y + F_k(y) = D u`, `f_k(x, s) = f(x, proj_[-k,k](s))`, with
/// under-relaxation. If the converged iterate satisfies `|y|_inf < k`
/// it solves the untruncated equation (the truncation is inactive at
/// every node); otherwise the truncation-active error asks for a
/// larger level.
pub fn solve_state_truncated(
    disc: &Discretization,
    u: &ScalarField,
    level: f64,
    opts: &StateOptions,
) -> Result<StateSolution> {
    check_field(disc, u)?;
    if !(level > 0.0) {
        return Err(Error::invalid(format!(
            "truncation level must be positive, got {level}"
        )));
    }
    let omega = opts.picard_relaxation;
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::invalid(format!(
            "picard relaxation must lie in (0, 1], got {omega}"
        )));
    }
    let load = disc.control_load(u);
    let lu = BandedLu::factor(disc.linear_op())?;

    let truncated_residual = |y: &ScalarField| -> Result<(Vec<f64>, ScalarField)> {
        let clamped = y.clamped(-level, level);
        let f_load = disc.nonlinear_load(&clamped)?;
        let mut r = disc.linear_op().matvec(y.values());
        for ((ri, fi), bi) in r.iter_mut().zip(f_load.values()).zip(load.values()) {
            *ri += fi - bi;
        }
        Ok((r, f_load))
    };

    let mut y = ScalarField::like(u, lu.solve(load.values()));
    let mut iterations = 1;
    loop {
        let (r, f_load) = truncated_residual(&y)?;
        let rnorm = norm2(&r);
        if rnorm <= opts.tol_state {
            let sup = y.linf_norm();
            if sup >= level {
                return Err(Error::TruncationActive {
                    level,
                    norm_inf: sup,
                });
            }
            // truncation inactive at every node, so y solves the
            // untruncated equation; report its residual
            let untruncated = disc.state_residual(&y, &load)?;
            return Ok(StateSolution {
                y,
                residual_norm: norm2(&untruncated),
                newton_iterations: iterations,
                globalization_used: false,
            });
        }
        if iterations >= opts.picard_max {
            return Err(Error::StateSolveFailed {
                report: SolveReport {
                    converged: false,
                    iterations,
                    final_residual: rnorm,
                    damping_history: vec![],
                },
            });
        }
        // fixed-point update y <- (1 - w) y + w K^{-1}(D u - F_k(y))
        let mut rhs = load.clone();
        rhs.axpy(-1.0, &f_load);
        let next = ScalarField::like(u, lu.solve(rhs.values()));
        y = y.scaled(1.0 - omega).add_scaled(omega, &next);
        iterations += 1;
    }
}

/// Solves both states and reports the largest nodal violation of the
/// comparison principle `u1 <= u2 => y1 <= y2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn comparison_check(
    disc: &Discretization,
    u1: &ScalarField,
    u2: &ScalarField,
    tolerance: f64,
    opts: &StateOptions,
) -> Result<ComparisonReport> {
    check_field(disc, u1)?;
    check_field(disc, u2)?;
    if let Some(bad) = u1
        .values()
        .iter()
        .zip(u2.values())
        .position(|(a, b)| a > b)
    {
        return Err(Error::invalid(format!(
            "comparison_check requires u1 <= u2 nodally; violated at dof {bad}"
        )));
    }
    let y1 = solve_state_newton(disc, u1, opts)?.y;
    let y2 = solve_state_newton(disc, u2, opts)?.y;
    let max_violation = y1
        .values()
        .iter()
        .zip(y2.values())
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
    Ok(ComparisonReport {
        max_violation,
        tolerance,
        pass: max_violation <= tolerance,
    })
}

fn check_field(disc: &Discretization, u: &ScalarField) -> Result<()> {
    if !u.matches(disc.grid()) {
        return Err(Error::DimensionMismatch {
            expected: disc.grid().n_interior(),
            found: u.len(),
        });
    }
    Ok(())
}
