//! Solver toolkit for optimal control problems governed by semilinear
//! elliptic equations with a convection term,
//!
//! ```text
//!     -div(a grad y) + b . grad y + f(x, y) = u   in Omega,
//!                                         y = 0   on the boundary,
//! ```
//!
//! minimizing a tracking objective with Tikhonov regularization over a
//! box of admissible controls. The convection field `b` is not assumed
//! divergence-free, so the linear part of the operator is nonsymmetric
//! and in general only satisfies a Garding inequality instead of being
//! coercive.
//!
//! The discretization is Q1 finite elements on a uniform rectangular
//! mesh with homogeneous Dirichlet conditions eliminated. The toolkit
//! follows a discretize-then-optimize approach: the adjoint operator is
//! the exact transpose of the discrete linearized state operator, so
//! reduced gradients and Hessian-vector products are exact up to solver
//! tolerance and can be validated against finite differences at tight
//! tolerances.
//!
//! Module overview:
//!
//! * [`grid`] - rectangular domains, uniform grids, degree-of-freedom
//!   maps, nodal scalar fields
//! * [`coeff`] - diffusion tensors and convection fields
//! * [`assemble`] - Q1 stiffness / convection / reaction / mass / load
//!   assembly with 2x2 Gauss quadrature
//! * [`sparse`], [`banded`], [`krylov`] - CSR operators, banded LU with
//!   partial pivoting, GMRES with ILU(0)
//! * [`nonlinearity`] - the admissible catalog of nonlinear terms and
//!   objective integrands with derivatives
//! * [`problem`] - full problem description and assembled discretization
//! * [`state`] - semilinear state solves (damped Newton, truncated
//!   Picard) and the comparison-principle check
//! * [`sensitivity`] - linearized, second-variation and adjoint solves
//! * [`control`] - reduced objective, gradient, Hessian-vector products,
//!   projected gradient and semismooth Newton optimizers
//! * [`eig`] - generalized eigenvalue helpers (shift-invert iteration,
//!   Lanczos)
//! * [`verify`] - executable diagnostics: finite-difference consistency,
//!   Garding constants, comparison suites, Lipschitz stability,
//!   manufactured-solution convergence, quadratic growth
//! * [`mms`] - manufactured solution cases
//! * [`catalog`] - ready-made benchmark problems

pub mod assemble;
pub mod banded;
pub mod catalog;
pub mod coeff;
pub mod control;
pub mod eig;
pub mod error;
pub mod grid;
pub mod krylov;
pub mod mms;
pub mod nonlinearity;
pub mod problem;
pub mod sensitivity;
pub mod sparse;
pub mod state;
pub mod verify;

pub use coeff::{Coefficient, DiffusionTensor, VectorCoefficient};
pub use error::{Error, Result};
pub use grid::{DofMap, RectDomain, ScalarField, UniformGrid};
pub use nonlinearity::{NonlinearitySpec, ObjectiveSpec};
pub use problem::{Bounds, Discretization, ProblemSpec};
pub use sparse::SparseOperator;
pub use state::{SolveReport, StateOptions, StateSolution};
