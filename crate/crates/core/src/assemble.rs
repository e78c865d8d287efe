//! Q1 finite-element assembly on the uniform grid.
//!
//! All terms use tensor 2x2 Gauss quadrature per element, which is
//! exact for the bilinear stiffness with constant coefficients and for
//! products of two Q1 functions. Boundary conditions are imposed by
//! elimination: only interior test/trial pairs are scattered.
//!
//! Nodal coefficient inputs (`assemble_reaction`, `assemble_load`) are
//! given at *all* grid nodes, row-major, and are interpolated
//! bilinearly inside each element.

use crate::coeff::{sym_lambda_min, DiffusionTensor, VectorCoefficient};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, UniformGrid};
use crate::sparse::SparseOperator;

/// 2-point Gauss abscissa on [-1, 1] (weights are 1).
const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Local Q1 node order: (-1,-1), (1,-1), (1,1), (-1,1).
#[inline]
fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

#[inline]
fn shape_grad_ref(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

struct ElementContext {
    /// physical quadrature points
    points: Vec<(f64, f64)>,
    /// shape values per quadrature point
    n: Vec<[f64; 4]>,
    /// physical shape gradients per quadrature point
    grad: Vec<[[f64; 2]; 4]>,
    /// quadrature weight including the Jacobian determinant
    w: f64,
}

fn quad_template(grid: &UniformGrid) -> (Vec<(f64, f64)>, Vec<[f64; 4]>, Vec<[[f64; 2]; 4]>, f64) {
    let pts = [-GAUSS, GAUSS];
    let mut ref_pts = Vec::with_capacity(4);
    let mut n = Vec::with_capacity(4);
    let mut grad = Vec::with_capacity(4);
    for &eta in &pts {
        for &xi in &pts {
            ref_pts.push((xi, eta));
            n.push(shape(xi, eta));
            let g = shape_grad_ref(xi, eta);
            let mut gp = [[0.0; 2]; 4];
            for a in 0..4 {
                gp[a][0] = g[a][0] * 2.0 / grid.hx();
                gp[a][1] = g[a][1] * 2.0 / grid.hy();
            }
            grad.push(gp);
        }
    }
    let w = grid.hx() * grid.hy() / 4.0;
    (ref_pts, n, grad, w)
}

fn element_context(grid: &UniformGrid, ex: usize, ey: usize, tpl: &(Vec<(f64, f64)>, Vec<[f64; 4]>, Vec<[[f64; 2]; 4]>, f64)) -> ElementContext {
    let (x0, y0) = grid.node_coords(ex, ey);
    let points = tpl
        .0
        .iter()
        .map(|&(xi, eta)| {
            (
                x0 + 0.5 * (xi + 1.0) * grid.hx(),
                y0 + 0.5 * (eta + 1.0) * grid.hy(),
            )
        })
        .collect();
    ElementContext {
        points,
        n: tpl.1.clone(),
        grad: tpl.2.clone(),
        w: tpl.3,
    }
}

/// Local node indices of element `(ex, ey)` in grid coordinates.
#[inline]
fn element_nodes(ex: usize, ey: usize) -> [(usize, usize); 4] {
    [
        (ex, ey),
        (ex + 1, ey),
        (ex + 1, ey + 1),
        (ex, ey + 1),
    ]
}

fn scatter(
    op: &mut SparseOperator,
    grid: &UniformGrid,
    nodes: &[(usize, usize); 4],
    local: &[[f64; 4]; 4],
) {
    let dofs = grid.dof_map();
    for (r, &(rx, ry)) in nodes.iter().enumerate() {
        let Some(row) = dofs.dof(rx, ry) else { continue };
        for (c, &(cx, cy)) in nodes.iter().enumerate() {
            let Some(col) = dofs.dof(cx, cy) else { continue };
            op.add_entry(row, col, local[r][c]);
        }
    }
}

/// Stiffness matrix of the divergence-form operator
/// `A y = -sum_ij d_j (a_ij d_i y)`, weak form
/// `K[r][c] = int sum_ij a_ij d_i phi_c d_j phi_r`.
///
/// The declared ellipticity constant of `a` is verified at every
/// quadrature point.
pub fn assemble_diffusion(grid: &UniformGrid, a: &DiffusionTensor) -> Result<SparseOperator> {
    let mut op = SparseOperator::q1_pattern(grid);
    let tpl = quad_template(grid);
    let lambda = a.lambda();
    if lambda <= 0.0 {
        return Err(Error::invalid(format!(
            "declared ellipticity constant must be positive, got {lambda}"
        )));
    }
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let ctx = element_context(grid, ex, ey, &tpl);
            let nodes = element_nodes(ex, ey);
            let mut local = [[0.0; 4]; 4];
            for (q, &(x, y)) in ctx.points.iter().enumerate() {
                let m = a.eval(x, y);
                for row in &m {
                    for &v in row {
                        if !v.is_finite() {
                            return Err(Error::NonFiniteCoefficient { x, y, value: v });
                        }
                    }
                }
                let lam = sym_lambda_min(m[0][0], m[0][1], m[1][0], m[1][1]);
                if lam < lambda - 1e-12 * (1.0 + lambda.abs()) {
                    return Err(Error::EllipticityViolation {
                        x,
                        y,
                        found: lam,
                        declared: lambda,
                    });
                }
                let g = &ctx.grad[q];
                for r in 0..4 {
                    for c in 0..4 {
                        // sum_ij a_ij d_i(trial=c) d_j(test=r)
                        let v = m[0][0] * g[c][0] * g[r][0]
                            + m[0][1] * g[c][0] * g[r][1]
                            + m[1][0] * g[c][1] * g[r][0]
                            + m[1][1] * g[c][1] * g[r][1];
                        local[r][c] += ctx.w * v;
                    }
                }
            }
            scatter(&mut op, grid, &nodes, &local);
        }
    }
    if op.asymmetry() <= 1e-12 * op.max_abs().max(1.0) {
        op.set_symmetric(true);
    }
    Ok(op)
}

/// Convection matrix `N[r][c] = int (b . grad phi_c) phi_r`. No
/// stabilization is applied here; callers add isotropic artificial
/// diffusion separately if requested.
pub fn assemble_convection(grid: &UniformGrid, b: &VectorCoefficient) -> Result<SparseOperator> {
    let mut op = SparseOperator::q1_pattern(grid);
    let tpl = quad_template(grid);
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let ctx = element_context(grid, ex, ey, &tpl);
            let nodes = element_nodes(ex, ey);
            let mut local = [[0.0; 4]; 4];
            for (q, &(x, y)) in ctx.points.iter().enumerate() {
                let (b1, b2) = b.eval(x, y);
                if !b1.is_finite() || !b2.is_finite() {
                    let value = if b1.is_finite() { b2 } else { b1 };
                    return Err(Error::NonFiniteCoefficient { x, y, value });
                }
                let g = &ctx.grad[q];
                let n = &ctx.n[q];
                for r in 0..4 {
                    for c in 0..4 {
                        local[r][c] += ctx.w * (b1 * g[c][0] + b2 * g[c][1]) * n[r];
                    }
                }
            }
            scatter(&mut op, grid, &nodes, &local);
        }
    }
    Ok(op)
}

/// Weighted mass matrix `R[r][c] = int c_h phi_c phi_r` with the
/// coefficient given nodally (all grid nodes) and interpolated
/// bilinearly. The coefficient must be nonnegative: it represents
/// either `a_0 >= 0` or a monotone nonlinearity slope.
pub fn assemble_reaction(grid: &UniformGrid, c_nodal: &[f64]) -> Result<SparseOperator> {
    if c_nodal.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_nodes(),
            found: c_nodal.len(),
        });
    }
    if let Some(bad) = c_nodal.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::MonotonicityViolation {
            index: bad,
            value: c_nodal[bad],
        });
    }
    let mut op = weighted_mass(grid, c_nodal);
    op.set_symmetric(true);
    Ok(op)
}

/// Consistent mass matrix `M[r][c] = int phi_c phi_r`.
pub fn assemble_mass(grid: &UniformGrid) -> SparseOperator {
    let ones = vec![1.0; grid.n_nodes()];
    let mut op = weighted_mass(grid, &ones);
    op.set_symmetric(true);
    op
}

fn weighted_mass(grid: &UniformGrid, c_nodal: &[f64]) -> SparseOperator {
    let mut op = SparseOperator::q1_pattern(grid);
    let tpl = quad_template(grid);
    let width = grid.nx() + 1;
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let ctx = element_context(grid, ex, ey, &tpl);
            let nodes = element_nodes(ex, ey);
            let cv: Vec<f64> = nodes
                .iter()
                .map(|&(ix, iy)| c_nodal[iy * width + ix])
                .collect();
            let mut local = [[0.0; 4]; 4];
            for q in 0..ctx.points.len() {
                let n = &ctx.n[q];
                let c_here: f64 = (0..4).map(|a| cv[a] * n[a]).sum();
                for r in 0..4 {
                    for c in 0..4 {
                        local[r][c] += ctx.w * c_here * n[c] * n[r];
                    }
                }
            }
            scatter(&mut op, grid, &nodes, &local);
        }
    }
    op
}

/// Load vector `F[r] = int g_h phi_r` where `g_h` is the bilinear
/// interpolant of the full nodal values `g_nodal`.
pub fn assemble_load(grid: &UniformGrid, g_nodal: &[f64]) -> Result<ScalarField> {
    if g_nodal.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_nodes(),
            found: g_nodal.len(),
        });
    }
    let tpl = quad_template(grid);
    let width = grid.nx() + 1;
    let dofs = grid.dof_map();
    let mut out = vec![0.0; grid.n_interior()];
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let ctx = element_context(grid, ex, ey, &tpl);
            let nodes = element_nodes(ex, ey);
            let gv: Vec<f64> = nodes
                .iter()
                .map(|&(ix, iy)| g_nodal[iy * width + ix])
                .collect();
            for q in 0..ctx.points.len() {
                let n = &ctx.n[q];
                let g_here: f64 = (0..4).map(|a| gv[a] * n[a]).sum();
                for (r, &(rx, ry)) in nodes.iter().enumerate() {
                    if let Some(row) = dofs.dof(rx, ry) {
                        out[row] += ctx.w * g_here * n[r];
                    }
                }
            }
        }
    }
    ScalarField::from_values(grid, out)
}

/// Stiffness matrix with identity tensor, the discrete H1-seminorm
/// Gram matrix.
pub fn assemble_h1_stiffness(grid: &UniformGrid) -> SparseOperator {
    assemble_diffusion(grid, &DiffusionTensor::identity())
        .expect("identity tensor is uniformly elliptic")
}

/// H1-seminorm distance between the Q1 interpolant of `full_nodal` and
/// an exact field with gradient `grad_exact`, by 2x2 Gauss quadrature.
///
/// Unlike the discrete seminorm of the nodal error (which
/// superconverges on uniform grids), this measures the genuine
/// first-order gradient error.
pub fn h1_error_quadrature(
    grid: &UniformGrid,
    full_nodal: &[f64],
    grad_exact: impl Fn(f64, f64) -> (f64, f64),
) -> f64 {
    debug_assert_eq!(full_nodal.len(), grid.n_nodes());
    let tpl = quad_template(grid);
    let width = grid.nx() + 1;
    let mut total = 0.0;
    for ey in 0..grid.ny() {
        for ex in 0..grid.nx() {
            let ctx = element_context(grid, ex, ey, &tpl);
            let nodes = element_nodes(ex, ey);
            let vals: Vec<f64> = nodes
                .iter()
                .map(|&(ix, iy)| full_nodal[iy * width + ix])
                .collect();
            for (q, &(x, y)) in ctx.points.iter().enumerate() {
                let g = &ctx.grad[q];
                let mut gx = 0.0;
                let mut gy = 0.0;
                for a in 0..4 {
                    gx += vals[a] * g[a][0];
                    gy += vals[a] * g[a][1];
                }
                let (ex_x, ex_y) = grad_exact(x, y);
                total += ctx.w * ((gx - ex_x) * (gx - ex_x) + (gy - ex_y) * (gy - ex_y));
            }
        }
    }
    total.sqrt()
}
