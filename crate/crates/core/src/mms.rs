//! Manufactured solutions for convergence studies.
//!
//! Each case fixes a smooth exact state `y*` vanishing on the boundary
//! of the unit square and carries the hand-derived load
//! `u* = A y* + b . grad y* + f(x, y*)`, so the discrete solver can be
//! measured against a known solution. All cases use `y* = sin(pi x)
//! sin(pi y)` and identity diffusion, hence `A y* = 2 pi^2 y*`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::coeff::{DiffusionTensor, VectorCoefficient};
use crate::error::Result;
use crate::grid::{RectDomain, ScalarField, UniformGrid};
use crate::nonlinearity::NonlinearitySpec;
use crate::problem::{Bounds, ProblemSpec};

type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Grad2 = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    convection: VectorCoefficient,
    nonlinearity: NonlinearitySpec,
    exact: Field2,
    exact_grad: Grad2,
    load: Field2,
}

fn sine(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

fn sine_dx(x: f64, y: f64) -> f64 {
    PI * (PI * x).cos() * (PI * y).sin()
}

fn sine_dy(x: f64, y: f64) -> f64 {
    PI * (PI * x).sin() * (PI * y).cos()
}

impl ManufacturedCase {
    /// Cubic nonlinearity, shear field `b = (1, x)` (divergence-free).
    pub fn sine_power() -> Self {
        Self {
            name: "sine-power",
            convection: VectorCoefficient::affine([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            nonlinearity: NonlinearitySpec::power(1.0, 2.0).expect("r = 2 is admissible"),
            exact: Arc::new(sine),
            exact_grad: Arc::new(|x, y| (sine_dx(x, y), sine_dy(x, y))),
            load: Arc::new(|x, y| {
                let s = sine(x, y);
                2.0 * PI * PI * s + sine_dx(x, y) + x * sine_dy(x, y) + s * s * s
            }),
        }
    }

    /// Cubic nonlinearity, expanding field `b = (1 + x, y)` with
    /// `div b = 2`.
    pub fn sine_power_divergent() -> Self {
        Self {
            name: "sine-power-divergent",
            convection: VectorCoefficient::affine([1.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            nonlinearity: NonlinearitySpec::power(1.0, 2.0).expect("r = 2 is admissible"),
            exact: Arc::new(sine),
            exact_grad: Arc::new(|x, y| (sine_dx(x, y), sine_dy(x, y))),
            load: Arc::new(|x, y| {
                let s = sine(x, y);
                2.0 * PI * PI * s + (1.0 + x) * sine_dx(x, y) + y * sine_dy(x, y) + s * s * s
            }),
        }
    }

    /// Exponential nonlinearity with compensated load, constant drift.
    pub fn sine_exponential() -> Self {
        Self {
            name: "sine-exponential",
            convection: VectorCoefficient::constant(1.0, 1.0),
            nonlinearity: NonlinearitySpec::exponential(1.0),
            exact: Arc::new(sine),
            exact_grad: Arc::new(|x, y| (sine_dx(x, y), sine_dy(x, y))),
            load: Arc::new(|x, y| {
                let s = sine(x, y);
                2.0 * PI * PI * s + sine_dx(x, y) + sine_dy(x, y) + s.exp()
            }),
        }
    }

    /// Identically zero exact solution (zero load for odd
    /// nonlinearities): every grid reproduces it exactly.
    pub fn zero() -> Self {
        Self {
            name: "zero",
            convection: VectorCoefficient::constant(1.0, 0.0),
            nonlinearity: NonlinearitySpec::power(1.0, 2.0).expect("r = 2 is admissible"),
            exact: Arc::new(|_, _| 0.0),
            exact_grad: Arc::new(|_, _| (0.0, 0.0)),
            load: Arc::new(|_, _| 0.0),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sine-power" => Ok(Self::sine_power()),
            "sine-power-divergent" => Ok(Self::sine_power_divergent()),
            "sine-exponential" => Ok(Self::sine_exponential()),
            "zero" => Ok(Self::zero()),
            other => Err(crate::error::Error::invalid(format!(
                "unknown manufactured case '{other}'"
            ))),
        }
    }

    /// Problem on an `nx` by `nx` grid of the unit square. The control
    /// bounds and objective are irrelevant for pure state solves.
    pub fn problem(&self, nx: usize) -> Result<ProblemSpec> {
        ProblemSpec::tracking(
            RectDomain::unit_square(),
            nx,
            nx,
            DiffusionTensor::identity(),
            self.convection.clone(),
            self.nonlinearity.clone(),
            |_, _| 0.0,
            1.0,
            Bounds::unconstrained(),
        )
    }

    pub fn exact_interior(&self, grid: &UniformGrid) -> ScalarField {
        grid.interior_field(|x, y| (self.exact)(x, y))
    }

    /// Nodal interpolation of the analytic load, used as the control.
    pub fn load_interior(&self, grid: &UniformGrid) -> ScalarField {
        grid.interior_field(|x, y| (self.load)(x, y))
    }

    pub fn exact_at(&self, x: f64, y: f64) -> f64 {
        (self.exact)(x, y)
    }

    pub fn exact_grad_at(&self, x: f64, y: f64) -> (f64, f64) {
        (self.exact_grad)(x, y)
    }
}
