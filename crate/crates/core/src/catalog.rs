//! Ready-made benchmark problems covering the nonlinearity catalog.
//!
//! All three live on the unit square with identity diffusion, tracking
//! target `0.5 sin(2 pi x) sin(pi y)`, Tikhonov weight `nu = 1e-2` and
//! control bounds `[-1, 1]`. The target amplitude is chosen so the
//! unconstrained optimum genuinely leaves the box, which keeps the
//! active-set machinery exercised.

use crate::coeff::{DiffusionTensor, VectorCoefficient};
use crate::error::Result;
use crate::grid::RectDomain;
use crate::nonlinearity::NonlinearitySpec;
use crate::problem::{Bounds, ProblemSpec};

pub const NU: f64 = 1e-2;

fn target(x: f64, y: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
}

fn build(
    nx: usize,
    convection: VectorCoefficient,
    nonlinearity: NonlinearitySpec,
) -> Result<ProblemSpec> {
    ProblemSpec::tracking(
        RectDomain::unit_square(),
        nx,
        nx,
        DiffusionTensor::identity(),
        convection,
        nonlinearity,
        target,
        NU,
        Bounds::new(-1.0, 1.0)?,
    )
}

/// Linear state equation with constant convection `b = (1, 1)`.
pub fn linear_quadratic(nx: usize) -> Result<ProblemSpec> {
    build(nx, VectorCoefficient::constant(1.0, 1.0), NonlinearitySpec::zero())
}

/// Cubic nonlinearity `f = |y|^2 y` with the rotating field
/// `b = (y, 1 - x)` (divergence-free but nonconstant).
pub fn power_rotation(nx: usize) -> Result<ProblemSpec> {
    build(
        nx,
        VectorCoefficient::affine([0.0, 0.0, 1.0], [1.0, -1.0, 0.0]),
        NonlinearitySpec::power(1.0, 2.0)?,
    )
}

/// Exponential nonlinearity `f = exp(y)` with the expanding field
/// `b = (1 + x, y)`, `div b = 2`.
pub fn exponential_drift(nx: usize) -> Result<ProblemSpec> {
    build(
        nx,
        VectorCoefficient::affine([1.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
        NonlinearitySpec::exponential(1.0),
    )
}

/// The whole catalog with stable names.
pub fn all(nx: usize) -> Result<Vec<(&'static str, ProblemSpec)>> {
    Ok(vec![
        ("linear-quadratic", linear_quadratic(nx)?),
        ("power-rotation", power_rotation(nx)?),
        ("exponential-drift", exponential_drift(nx)?),
    ])
}

/// Catalog problem by name, as exposed through the configuration layer.
pub fn by_name(name: &str, nx: usize) -> Result<ProblemSpec> {
    match name {
        "linear-quadratic" => linear_quadratic(nx),
        "power-rotation" => power_rotation(nx),
        "exponential-drift" => exponential_drift(nx),
        other => Err(crate::error::Error::invalid(format!(
            "unknown catalog problem '{other}'"
        ))),
    }
}
