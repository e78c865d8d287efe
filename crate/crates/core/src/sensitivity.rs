//! Linearized, second-variation and adjoint solves around a converged
//! state.
//!
//! One banded factorization of the linearized operator
//! `K(y) = K_diff + N + M diag(f'(y))` serves four purposes: the
//! derivative of the control-to-state map (`K z = D v`), the second
//! derivative (`K z = -M (f''(y) z1 z2)`), the adjoint state
//! (`K^T phi = dL/dy` load), and the Hessian back-solve. Since the
//! transpose solve reuses the same factorization, the discrete adjoint
//! identity `w . (K v) = v . (K^T w)` holds to rounding, which is what
//! makes the reduced gradients exact.

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::nonlinearity::Order;
use crate::problem::Discretization;
use crate::sparse::SparseOperator;

/// Factored linearization of the state equation at a given state.
pub struct Linearization<'d> {
    disc: &'d Discretization,
    y: ScalarField,
    op: SparseOperator,
    lu: BandedLu,
}

impl<'d> Linearization<'d> {
    pub fn at(disc: &'d Discretization, y: &ScalarField) -> Result<Self> {
        if !y.matches(disc.grid()) {
            return Err(Error::DimensionMismatch {
                expected: disc.grid().n_interior(),
                found: y.len(),
            });
        }
        let op = disc.linearized_operator(y)?;
        let lu = BandedLu::factor(&op)?;
        Ok(Self {
            disc,
            y: y.clone(),
            op,
            lu,
        })
    }

    pub fn state(&self) -> &ScalarField {
        &self.y
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    /// Solves `K z = load` for a raw dof load.
    pub fn solve_load(&self, load: &[f64]) -> ScalarField {
        ScalarField::like(&self.y, self.lu.solve(load))
    }

    /// Solves `K^T phi = load`.
    pub fn solve_adjoint_load(&self, load: &[f64]) -> ScalarField {
        ScalarField::like(&self.y, self.lu.solve_transpose(load))
    }

    /// Derivative of the control-to-state map in direction `v`:
    /// `K z = D v` with the lumped control load.
    pub fn solve_control(&self, v: &ScalarField) -> ScalarField {
        let rhs = self.disc.control_load(v);
        self.solve_load(rhs.values())
    }

    /// Second derivative of the control-to-state map:
    /// `K z = -M (f''(y) z1 z2)` with the product taken nodally.
    pub fn solve_second_variation(
        &self,
        z1: &ScalarField,
        z2: &ScalarField,
    ) -> Result<ScalarField> {
        let fpp = self.curvature_weights()?;
        let mut prod = vec![0.0; z1.len()];
        for (((p, f), a), b) in prod
            .iter_mut()
            .zip(&fpp)
            .zip(z1.values())
            .zip(z2.values())
        {
            // product first: keeps the solve bitwise symmetric in (z1, z2)
            *p = -f * (a * b);
        }
        let rhs = self.disc.mass().matvec(&prod);
        Ok(self.solve_load(&rhs))
    }

    /// Interior nodal second derivative `f''(x, y)`; capability-checked.
    pub fn curvature_weights(&self) -> Result<Vec<f64>> {
        let f = &self.disc.spec().nonlinearity;
        if !f.is_twice_differentiable() {
            return Err(Error::NotTwiceDifferentiable(
                "second-variation solves need a C2 nonlinearity".into(),
            ));
        }
        f.eval_interior(self.disc.grid(), &self.y, Order::Second)
    }

    /// Adjoint state for the tracking objective:
    /// `K^T phi = M (y - y_d)`.
    pub fn adjoint_for_objective(&self) -> ScalarField {
        let mut misfit = self.y.clone();
        misfit.axpy(-1.0, self.disc.spec().objective.target());
        let load = self.disc.mass().matvec(misfit.values());
        self.solve_adjoint_load(&load)
    }
}

/// One-shot linearized solve `(K z = D v)` at state `y`.
pub fn solve_linearized(
    disc: &Discretization,
    y: &ScalarField,
    v: &ScalarField,
) -> Result<ScalarField> {
    Ok(Linearization::at(disc, y)?.solve_control(v))
}

/// One-shot second-variation solve at state `y`.
pub fn solve_second_variation(
    disc: &Discretization,
    y: &ScalarField,
    z1: &ScalarField,
    z2: &ScalarField,
) -> Result<ScalarField> {
    Linearization::at(disc, y)?.solve_second_variation(z1, z2)
}

/// One-shot adjoint solve for the tracking objective at state `y`.
pub fn solve_adjoint(disc: &Discretization, y: &ScalarField) -> Result<ScalarField> {
    Ok(Linearization::at(disc, y)?.adjoint_for_objective())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::state::{solve_state_newton, StateOptions};

    fn setup(nx: usize) -> (Discretization, ScalarField) {
        let spec = catalog::power_rotation(nx).unwrap();
        let disc = Discretization::new(spec).unwrap();
        let u = ScalarField::from_fn(disc.grid(), |x, y| 0.7 * (x + 2.0 * y).sin());
        (disc, u)
    }

    #[test]
    fn zero_direction_gives_zero() {
        let (disc, u) = setup(8);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let z = solve_linearized(&disc, &y, &ScalarField::zeros(disc.grid())).unwrap();
        assert_eq!(z.linf_norm(), 0.0);
    }

    #[test]
    fn zero_nonlinearity_reduces_to_plain_linear_solve() {
        let spec = catalog::linear_quadratic(8).unwrap();
        let disc = Discretization::new(spec).unwrap();
        let u = ScalarField::from_fn(disc.grid(), |x, y| x * y);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let v = ScalarField::from_fn(disc.grid(), |x, y| (x - y).cos());
        let z = solve_linearized(&disc, &y, &v).unwrap();
        let rhs = disc.control_load(&v);
        let direct = crate::state::solve_linear(disc.linear_op(), rhs.values()).unwrap();
        let zd = ScalarField::like(&v, direct);
        assert!(z.max_diff(&zd) <= 1e-11);
    }

    /// Finite-difference oracle on states: (y(u + t v) - y(u)) / t
    /// approaches z_v at first order in t.
    #[test]
    fn linearized_solve_is_state_derivative() {
        let (disc, u) = setup(12);
        let opts = StateOptions::default();
        let y = solve_state_newton(&disc, &u, &opts).unwrap().y;
        let v = ScalarField::from_fn(disc.grid(), |x, y| (2.0 * x - y).cos());
        let z = solve_linearized(&disc, &y, &v).unwrap();
        let mut errors = Vec::new();
        for &t in &[1e-2, 1e-3, 1e-4, 1e-5] {
            let ut = u.add_scaled(t, &v);
            let yt = solve_state_newton(&disc, &ut, &opts).unwrap().y;
            let mut diff = yt.clone();
            diff.axpy(-1.0, &y);
            let mut fd = diff.scaled(1.0 / t);
            fd.axpy(-1.0, &z);
            errors.push(fd.linf_norm());
        }
        // slope ~1 on log-log: each error should shrink ~10x until the
        // solver noise floor
        for w in errors.windows(2) {
            if w[1] > 1e-9 {
                let slope = (w[0] / w[1]).log10();
                assert!((0.7..=1.3).contains(&slope), "errors {errors:?}");
            }
        }
        assert!(errors.last().unwrap() < &1e-4);
    }

    #[test]
    fn second_variation_symmetry_and_zero_cases() {
        let (disc, u) = setup(8);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let lin = Linearization::at(&disc, &y).unwrap();
        let v1 = ScalarField::from_fn(disc.grid(), |x, y| x + y);
        let v2 = ScalarField::from_fn(disc.grid(), |x, y| x - y);
        let z1 = lin.solve_control(&v1);
        let z2 = lin.solve_control(&v2);
        let a = lin.solve_second_variation(&z1, &z2).unwrap();
        let b = lin.solve_second_variation(&z2, &z1).unwrap();
        assert_eq!(a, b);
        let zero = lin
            .solve_second_variation(&ScalarField::zeros(disc.grid()), &z2)
            .unwrap();
        assert_eq!(zero.linf_norm(), 0.0);
    }

    #[test]
    fn second_variation_vanishes_for_linear_problem() {
        let spec = catalog::linear_quadratic(8).unwrap();
        let disc = Discretization::new(spec).unwrap();
        let u = ScalarField::constant(disc.grid(), 0.3);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let lin = Linearization::at(&disc, &y).unwrap();
        let v = ScalarField::from_fn(disc.grid(), |x, _| x);
        let z = lin.solve_control(&v);
        let out = lin.solve_second_variation(&z, &z).unwrap();
        assert_eq!(out.linf_norm(), 0.0);
    }

    #[test]
    fn second_variation_capability_error_for_r1() {
        let spec = crate::problem::ProblemSpec::tracking(
            crate::grid::RectDomain::unit_square(),
            8,
            8,
            crate::coeff::DiffusionTensor::identity(),
            crate::coeff::VectorCoefficient::zero(),
            crate::nonlinearity::NonlinearitySpec::power(1.0, 1.0).unwrap(),
            |_, _| 0.0,
            1.0,
            crate::problem::Bounds::unconstrained(),
        )
        .unwrap();
        let disc = Discretization::new(spec).unwrap();
        let u = ScalarField::constant(disc.grid(), 0.5);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let lin = Linearization::at(&disc, &y).unwrap();
        let z = lin.solve_control(&u);
        assert!(matches!(
            lin.solve_second_variation(&z, &z),
            Err(Error::NotTwiceDifferentiable(_))
        ));
    }

    #[test]
    fn adjoint_zero_misfit_gives_zero() {
        // target chosen as the state at u = 0, so phi = 0 there
        let base = catalog::power_rotation(8).unwrap();
        let disc0 = Discretization::new(base).unwrap();
        let u0 = ScalarField::zeros(disc0.grid());
        let y0 = solve_state_newton(&disc0, &u0, &StateOptions::default()).unwrap().y;

        let mut spec = catalog::power_rotation(8).unwrap();
        spec.objective =
            crate::nonlinearity::ObjectiveSpec::tracking(y0.clone(), spec.objective.nu()).unwrap();
        let disc = Discretization::new(spec).unwrap();
        let phi = solve_adjoint(&disc, &y0).unwrap();
        assert!(phi.linf_norm() <= 1e-12);
    }

    /// Transpose round trip: the discrete adjoint identity
    /// `w . (K v) = v . (K^T w)` holds to rounding for the factored
    /// linearization.
    #[test]
    fn adjoint_identity() {
        let (disc, u) = setup(10);
        let y = solve_state_newton(&disc, &u, &StateOptions::default()).unwrap().y;
        let lin = Linearization::at(&disc, &y).unwrap();
        let v = ScalarField::from_fn(disc.grid(), |x, y| (5.0 * x * y).sin());
        let w = ScalarField::from_fn(disc.grid(), |x, y| (3.0 * (x - y)).cos());
        // <w, K^{-1} v> = <K^{-T} w, v>
        let z = lin.solve_load(v.values());
        let q = lin.solve_adjoint_load(w.values());
        let lhs: f64 = w.values().iter().zip(z.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = q.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
            "adjoint identity violated: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn self_adjoint_case_matches_forward_solve() {
        // b = 0 and f = 0: the operator is symmetric, adjoint = forward
        let spec = crate::problem::ProblemSpec::tracking(
            crate::grid::RectDomain::unit_square(),
            8,
            8,
            crate::coeff::DiffusionTensor::identity(),
            crate::coeff::VectorCoefficient::zero(),
            crate::nonlinearity::NonlinearitySpec::zero(),
            |_, _| 0.0,
            1.0,
            crate::problem::Bounds::unconstrained(),
        )
        .unwrap();
        let disc = Discretization::new(spec).unwrap();
        let y = ScalarField::zeros(disc.grid());
        let lin = Linearization::at(&disc, &y).unwrap();
        assert!(lin.operator().asymmetry() <= 1e-12);
        let load = ScalarField::from_fn(disc.grid(), |x, y| x * (1.0 - y));
        let fwd = lin.solve_load(load.values());
        let adj = lin.solve_adjoint_load(load.values());
        assert!(fwd.max_diff(&adj) <= 1e-11);
    }
}
