//! Coefficient functions of the divergence-form operator: the diffusion
//! tensor `a` with its declared ellipticity constant and the convection
//! field `b`.

use std::fmt;
use std::sync::Arc;

/// Scalar coefficient of two spatial variables, either a constant or a
/// closed-form callback.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn func(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function(f) => f(x, y),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Bounded diffusion tensor `a = (a_ij)` together with the declared
/// ellipticity constant `Lambda > 0`. Assembly verifies pointwise at
/// every quadrature point that `lambda_min(sym a) >= Lambda`.
#[derive(Clone, Debug)]
pub struct DiffusionTensor {
    pub a11: Coefficient,
    pub a12: Coefficient,
    pub a21: Coefficient,
    pub a22: Coefficient,
    lambda: f64,
}

impl DiffusionTensor {
    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self {
            a11: Coefficient::Constant(s),
            a12: Coefficient::Constant(0.0),
            a21: Coefficient::Constant(0.0),
            a22: Coefficient::Constant(s),
            lambda: s,
        }
    }

    /// Constant tensor; the ellipticity constant is the smallest
    /// eigenvalue of the symmetric part.
    pub fn constant(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        let lambda = sym_lambda_min(a11, a12, a21, a22);
        Self {
            a11: a11.into(),
            a12: a12.into(),
            a21: a21.into(),
            a22: a22.into(),
            lambda,
        }
    }

    /// Variable tensor with a caller-declared ellipticity constant.
    pub fn from_coefficients(
        a11: Coefficient,
        a12: Coefficient,
        a21: Coefficient,
        a22: Coefficient,
        lambda: f64,
    ) -> Self {
        Self {
            a11,
            a12,
            a21,
            a22,
            lambda,
        }
    }

    /// Declared ellipticity constant.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Tensor entries at a point, row-major `[[a11, a12], [a21, a22]]`.
    pub fn eval(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [
            [self.a11.eval(x, y), self.a12.eval(x, y)],
            [self.a21.eval(x, y), self.a22.eval(x, y)],
        ]
    }
}

/// Smallest eigenvalue of the symmetric part of a 2x2 matrix.
pub(crate) fn sym_lambda_min(a11: f64, a12: f64, a21: f64, a22: f64) -> f64 {
    let q = 0.5 * (a12 + a21);
    let mid = 0.5 * (a11 + a22);
    let rad = (0.25 * (a11 - a22) * (a11 - a22) + q * q).sqrt();
    mid - rad
}

/// Convection field `b = (b1, b2)`. No assumption on its divergence is
/// made anywhere in the toolkit.
#[derive(Clone, Debug)]
pub struct VectorCoefficient {
    pub b1: Coefficient,
    pub b2: Coefficient,
}

impl VectorCoefficient {
    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn constant(b1: f64, b2: f64) -> Self {
        Self {
            b1: b1.into(),
            b2: b2.into(),
        }
    }

    /// Affine field: `b_i(x, y) = c[0] + c[1] x + c[2] y` per component.
    pub fn affine(c1: [f64; 3], c2: [f64; 3]) -> Self {
        Self {
            b1: Coefficient::func(move |x, y| c1[0] + c1[1] * x + c1[2] * y),
            b2: Coefficient::func(move |x, y| c2[0] + c2[1] * x + c2[2] * y),
        }
    }

    pub fn from_fns(
        b1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        b2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            b1: Coefficient::func(b1),
            b2: Coefficient::func(b2),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.b1.eval(x, y), self.b2.eval(x, y))
    }
}
