//! Full problem description and the assembled discretization.

use crate::assemble::{
    assemble_convection, assemble_diffusion, assemble_h1_stiffness, assemble_load, assemble_mass,
};
use crate::coeff::{DiffusionTensor, VectorCoefficient};
use crate::error::{Error, Result};
use crate::grid::{RectDomain, ScalarField, UniformGrid};
use crate::nonlinearity::{NonlinearitySpec, ObjectiveSpec, Order};
use crate::sparse::SparseOperator;

/// Pointwise control bounds `alpha <= u <= beta`; either side may be
/// infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::InvalidBounds {
                alpha: lower,
                beta: upper,
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn unconstrained() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn is_lower_finite(&self) -> bool {
        self.lower.is_finite()
    }

    pub fn is_upper_finite(&self) -> bool {
        self.upper.is_finite()
    }

    pub fn project(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn project_field(&self, u: &ScalarField) -> ScalarField {
        u.clamped(self.lower, self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// The continuous problem: domain and grid resolution, operator
/// coefficients, nonlinearity, tracking objective and control bounds.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: RectDomain,
    pub nx: usize,
    pub ny: usize,
    pub diffusion: DiffusionTensor,
    pub convection: VectorCoefficient,
    pub nonlinearity: NonlinearitySpec,
    pub objective: ObjectiveSpec,
    pub bounds: Bounds,
    /// Isotropic artificial-diffusion knob for strongly
    /// convection-dominated runs; 0 keeps the discrete operator faithful
    /// to the continuous one.
    pub stabilization: f64,
}

impl ProblemSpec {
    /// Convenience constructor sampling the tracking target from a
    /// closed-form function.
    #[allow(clippy::too_many_arguments)]
    pub fn tracking(
        domain: RectDomain,
        nx: usize,
        ny: usize,
        diffusion: DiffusionTensor,
        convection: VectorCoefficient,
        nonlinearity: NonlinearitySpec,
        target: impl Fn(f64, f64) -> f64,
        nu: f64,
        bounds: Bounds,
    ) -> Result<Self> {
        let grid = UniformGrid::new(domain, nx, ny)?;
        let objective = ObjectiveSpec::tracking(grid.interior_field(target), nu)?;
        let spec = Self {
            domain,
            nx,
            ny,
            diffusion,
            convection,
            nonlinearity,
            objective,
            bounds,
            stabilization: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        UniformGrid::new(self.domain, self.nx, self.ny)?;
        Bounds::new(self.bounds.lower, self.bounds.upper)?;
        if self.stabilization < 0.0 || !self.stabilization.is_finite() {
            return Err(Error::invalid(format!(
                "stabilization must be a finite value >= 0, got {}",
                self.stabilization
            )));
        }
        if !(self.objective.nu() > 0.0) {
            return Err(Error::invalid("Tikhonov weight nu must be positive"));
        }
        Ok(())
    }

    /// Stable digest of the structural parameters, recorded in every
    /// diagnostic report. Function-valued coefficients contribute only
    /// their kind.
    pub fn digest(&self) -> String {
        let s = format!(
            "domain=[{},{}]x[{},{}];grid={}x{};a={:?};b={:?};f={};nu={};bounds=[{},{}];stab={}",
            self.domain.x_min,
            self.domain.x_max,
            self.domain.y_min,
            self.domain.y_max,
            self.nx,
            self.ny,
            self.diffusion,
            self.convection,
            self.nonlinearity.describe(),
            self.objective.nu(),
            self.bounds.lower,
            self.bounds.upper,
            self.stabilization,
        );
        format!("{:016x}", fnv1a64(s.as_bytes()))
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The assembled discrete problem: grid, operator blocks and the mass
/// matrix, all immutable after construction.
#[derive(Debug)]
pub struct Discretization {
    spec: ProblemSpec,
    grid: UniformGrid,
    diffusion: SparseOperator,
    convection: SparseOperator,
    /// diffusion (incl. stabilization) + convection
    linear_op: SparseOperator,
    mass: SparseOperator,
    /// identity-tensor stiffness, the discrete H1-seminorm Gram matrix
    h1: SparseOperator,
}

impl Discretization {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let grid = UniformGrid::new(spec.domain, spec.nx, spec.ny)?;
        if !spec.objective.target().matches(&grid) {
            return Err(Error::DimensionMismatch {
                expected: grid.n_interior(),
                found: spec.objective.target().len(),
            });
        }
        let h1 = assemble_h1_stiffness(&grid);
        let mut diffusion = assemble_diffusion(&grid, &spec.diffusion)?;
        if spec.stabilization > 0.0 {
            diffusion = diffusion.add_scaled(spec.stabilization, &h1)?;
        }
        let convection = assemble_convection(&grid, &spec.convection)?;
        let linear_op = diffusion.add_scaled(1.0, &convection)?;
        let mass = assemble_mass(&grid);
        Ok(Self {
            spec,
            grid,
            diffusion,
            convection,
            linear_op,
            mass,
            h1,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn diffusion(&self) -> &SparseOperator {
        &self.diffusion
    }

    pub fn convection(&self) -> &SparseOperator {
        &self.convection
    }

    /// Diffusion + convection block (the linearization with the
    /// reaction slope dropped).
    pub fn linear_op(&self) -> &SparseOperator {
        &self.linear_op
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn h1_stiffness(&self) -> &SparseOperator {
        &self.h1
    }

    /// Discrete L2 inner product of state-space fields, `a^T M b` with
    /// the consistent mass matrix.
    pub fn l2_inner(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        let mb = self.mass.matvec(b.values());
        a.values().iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    pub fn l2_norm(&self, a: &ScalarField) -> f64 {
        self.l2_inner(a, a).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, a: &ScalarField) -> f64 {
        self.h1.quadratic_form(a.values()).max(0.0).sqrt()
    }

    /// Cell area `hx * hy`, the diagonal of the lumped control Gram.
    pub fn cell_area(&self) -> f64 {
        self.grid.hx() * self.grid.hy()
    }

    /// Discrete L2 inner product of the control space. Controls carry
    /// the lumped Gram `D = hx hy I` (each interior hat integrates to
    /// `hx hy`): with it the pointwise projection formula
    /// `u = Proj(-phi/nu)` is the exact first-order condition of the
    /// discrete problem, which a consistent-mass pairing would spoil
    /// at O(h^2).
    pub fn control_inner(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        self.cell_area() * dot
    }

    pub fn control_norm(&self, a: &ScalarField) -> f64 {
        self.control_inner(a, a).max(0.0).sqrt()
    }

    /// Load vector of full nodal data.
    pub fn load_full(&self, g_nodal: &[f64]) -> Result<ScalarField> {
        assemble_load(&self.grid, g_nodal)
    }

    /// Right-hand side exerted by a control, `D u` with the lumped
    /// control Gram.
    pub fn control_load(&self, u: &ScalarField) -> ScalarField {
        u.scaled(self.cell_area())
    }

    /// Nonlinear load `F(y)`: `f` evaluated nodally on the Dirichlet
    /// extension of `y` and assembled through the mass pairing.
    pub fn nonlinear_load(&self, y: &ScalarField) -> Result<ScalarField> {
        let f_full = self.spec.nonlinearity.eval_nodes_full(&self.grid, y, Order::Value)?;
        assemble_load(&self.grid, &f_full)
    }

    /// Interior nodal slope `df/dy(x, y)`; always nonnegative for the
    /// catalog.
    pub fn fprime_interior(&self, y: &ScalarField) -> Result<Vec<f64>> {
        self.spec.nonlinearity.eval_interior(&self.grid, y, Order::First)
    }

    /// Exact Jacobian of the discrete residual at state `y`:
    /// `K_diff + N + M diag(df/dy(y))`.
    pub fn linearized_operator(&self, y: &ScalarField) -> Result<SparseOperator> {
        let fp = self.fprime_interior(y)?;
        if let Some(bad) = fp.iter().position(|v| *v < 0.0) {
            return Err(Error::MonotonicityViolation {
                index: bad,
                value: fp[bad],
            });
        }
        let reaction = self.mass.scale_columns(&fp);
        self.linear_op.add_scaled(1.0, &reaction)
    }

    /// Residual of the discrete state equation,
    /// `K y + F(y) - M u`, as a raw dof vector.
    pub fn state_residual(&self, y: &ScalarField, load: &ScalarField) -> Result<Vec<f64>> {
        let mut r = self.linear_op.matvec(y.values());
        let fy = self.nonlinear_load(y)?;
        for ((r, f), b) in r.iter_mut().zip(fy.values()).zip(load.values()) {
            *r += f - b;
        }
        Ok(r)
    }
}
