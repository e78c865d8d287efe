//! Catalog of admissible nonlinearities and objective integrands.
//!
//! The catalog is closed on purpose: every entry is monotone
//! nondecreasing in the state with `f(x, .)` twice differentiable where
//! advertised, so the structural hypotheses of the solver (nonnegative
//! linearization weight, bounded derivatives on bounded state ranges)
//! hold by construction instead of by user promise.

use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, UniformGrid};

/// Derivative order requested from [`NonlinearitySpec::eval`] and
/// [`ObjectiveSpec::eval`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

#[derive(Clone, Debug)]
enum Kind {
    /// f = 0
    Zero,
    /// f(x, y) = a0(x) |y|^r y, r >= 1
    Power { a0: Coefficient, r: f64 },
    /// f(x, y) = a0(x) exp(y)
    Exponential { a0: Coefficient },
}

/// Nonlinear term `f(x, y)` of the state equation.
#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    kind: Kind,
}

impl NonlinearitySpec {
    pub fn zero() -> Self {
        Self { kind: Kind::Zero }
    }

    /// `f(x, y) = a0(x) |y|^r y`. Requires `r >= 1`; second derivatives
    /// are only available for `r > 1`.
    pub fn power(a0: impl Into<Coefficient>, r: f64) -> Result<Self> {
        if !r.is_finite() || r < 1.0 {
            return Err(Error::invalid(format!(
                "power nonlinearity needs exponent r >= 1, got {r}"
            )));
        }
        Ok(Self {
            kind: Kind::Power { a0: a0.into(), r },
        })
    }

    /// `f(x, y) = a0(x) exp(y)`.
    pub fn exponential(a0: impl Into<Coefficient>) -> Self {
        Self {
            kind: Kind::Exponential { a0: a0.into() },
        }
    }

    /// Whether second-order evaluations are admissible.
    pub fn is_twice_differentiable(&self) -> bool {
        match &self.kind {
            Kind::Zero | Kind::Exponential { .. } => true,
            Kind::Power { r, .. } => *r > 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Evaluates `f`, `df/dy` or `d2f/dy2` at `(x, y)` for state value
    /// `s`. The second derivative of the power kind at `s = 0` is the
    /// limit value 0 for `r > 1`; requesting order 2 with `r = 1` is a
    /// capability error.
    pub fn eval(&self, x: f64, y: f64, s: f64, order: Order) -> Result<f64> {
        match &self.kind {
            Kind::Zero => Ok(0.0),
            Kind::Power { a0, r } => {
                let a = a0.eval(x, y);
                let r = *r;
                Ok(match order {
                    Order::Value => a * s.abs().powf(r) * s,
                    Order::First => a * (r + 1.0) * s.abs().powf(r),
                    Order::Second => {
                        if r <= 1.0 {
                            return Err(Error::NotTwiceDifferentiable(
                                "power nonlinearity with r = 1 is first-order only".into(),
                            ));
                        }
                        if s == 0.0 {
                            0.0
                        } else {
                            a * (r + 1.0) * r * s.abs().powf(r - 1.0) * s.signum()
                        }
                    }
                })
            }
            Kind::Exponential { a0 } => Ok(a0.eval(x, y) * s.exp()),
        }
    }

    /// `f` evaluated at every grid node for the Dirichlet extension of
    /// an interior state field (`y = 0` on the boundary).
    pub fn eval_nodes_full(
        &self,
        grid: &UniformGrid,
        state: &ScalarField,
        order: Order,
    ) -> Result<Vec<f64>> {
        let full_state = state.to_full_nodal(grid);
        let mut out = Vec::with_capacity(grid.n_nodes());
        let mut k = 0;
        for iy in 0..=grid.ny() {
            for ix in 0..=grid.nx() {
                let (x, y) = grid.node_coords(ix, iy);
                out.push(self.eval(x, y, full_state[k], order)?);
                k += 1;
            }
        }
        Ok(out)
    }

    /// `f` evaluated at the interior nodes only.
    pub fn eval_interior(
        &self,
        grid: &UniformGrid,
        state: &ScalarField,
        order: Order,
    ) -> Result<Vec<f64>> {
        let dofs = grid.dof_map();
        let mut out = Vec::with_capacity(grid.n_interior());
        for (dof, &s) in state.values().iter().enumerate() {
            let (ix, iy) = dofs.node(dof);
            let (x, y) = grid.node_coords(ix, iy);
            out.push(self.eval(x, y, s, order)?);
        }
        Ok(out)
    }

    pub(crate) fn describe(&self) -> String {
        match &self.kind {
            Kind::Zero => "zero".to_string(),
            Kind::Power { r, .. } => format!("power(r={r})"),
            Kind::Exponential { .. } => "exponential".to_string(),
        }
    }
}

/// Tracking objective integrand `L(x, y) = (y - y_d(x))^2 / 2` with
/// Tikhonov weight `nu > 0`.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    target: ScalarField,
    nu: f64,
}

impl ObjectiveSpec {
    pub fn tracking(target: ScalarField, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!(
                "Tikhonov weight must satisfy nu > 0, got {nu}"
            )));
        }
        Ok(Self { target, nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn target(&self) -> &ScalarField {
        &self.target
    }

    /// `L`, `dL/dy` or `d2L/dy2` at a point; the target is evaluated
    /// through its Q1 interpolant.
    pub fn eval(&self, grid: &UniformGrid, x: f64, y: f64, s: f64, order: Order) -> f64 {
        let full = self.target.to_full_nodal(grid);
        let yd = grid.interp_nodal(&full, x, y);
        match order {
            Order::Value => 0.5 * (s - yd) * (s - yd),
            Order::First => s - yd,
            Order::Second => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RectDomain;

    #[test]
    fn power_values() {
        let f = NonlinearitySpec::power(1.0, 2.0).unwrap();
        // f(y) = |y|^2 y
        assert_eq!(f.eval(0.0, 0.0, 2.0, Order::Value).unwrap(), 8.0);
        // symbolic: f'(y) = (r + 1) |y|^r = 3 |y|^2 at y = -1
        assert_eq!(f.eval(0.0, 0.0, -1.0, Order::First).unwrap(), 3.0);
        // symbolic: f''(y) = r (r + 1) |y|^{r-1} sign(y) = -6 at y = -1
        assert_eq!(f.eval(0.0, 0.0, -1.0, Order::Second).unwrap(), -6.0);
        // limit convention at the origin
        assert_eq!(f.eval(0.0, 0.0, 0.0, Order::Second).unwrap(), 0.0);
    }

    #[test]
    fn exponential_values_at_zero() {
        let f = NonlinearitySpec::exponential(1.0);
        for order in [Order::Value, Order::First, Order::Second] {
            assert_eq!(f.eval(0.3, 0.7, 0.0, order).unwrap(), 1.0);
        }
    }

    #[test]
    fn power_r1_is_first_order_only() {
        let f = NonlinearitySpec::power(1.0, 1.0).unwrap();
        assert!(!f.is_twice_differentiable());
        assert!(f.eval(0.0, 0.0, 0.5, Order::First).is_ok());
        assert!(matches!(
            f.eval(0.0, 0.0, 0.5, Order::Second),
            Err(Error::NotTwiceDifferentiable(_))
        ));
    }

    #[test]
    fn rejects_r_below_one() {
        assert!(NonlinearitySpec::power(1.0, 0.5).is_err());
    }

    #[test]
    fn monotone_in_state_on_random_samples() {
        let specs = [
            NonlinearitySpec::power(0.7, 2.0).unwrap(),
            NonlinearitySpec::power(2.0, 1.0).unwrap(),
            NonlinearitySpec::exponential(0.3),
            NonlinearitySpec::zero(),
        ];
        let mut s = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 10_000) as f64 / 500.0 - 10.0
        };
        for spec in &specs {
            for _ in 0..1000 {
                let x = next().abs() / 10.0;
                let y = next().abs() / 10.0;
                let v = next();
                let slope = spec.eval(x, y, v, Order::First).unwrap();
                assert!(slope >= 0.0, "df/dy must be nonnegative, got {slope}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = [
            NonlinearitySpec::power(1.3, 2.0).unwrap(),
            NonlinearitySpec::power(1.0, 3.0).unwrap(),
            NonlinearitySpec::exponential(0.8),
        ];
        let h = 1e-5;
        for spec in &specs {
            for &y in &[-1.7, -0.4, 0.6, 2.2] {
                let fp = spec.eval(0.2, 0.8, y + h, Order::Value).unwrap();
                let fm = spec.eval(0.2, 0.8, y - h, Order::Value).unwrap();
                let f0 = spec.eval(0.2, 0.8, y, Order::Value).unwrap();
                let d1 = spec.eval(0.2, 0.8, y, Order::First).unwrap();
                let d2 = spec.eval(0.2, 0.8, y, Order::Second).unwrap();
                let fd1 = (fp - fm) / (2.0 * h);
                let fd2 = (fp - 2.0 * f0 + fm) / (h * h);
                assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0));
                assert!((fd2 - d2).abs() <= 1e-4 * d2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn value_at_origin() {
        let power = NonlinearitySpec::power(5.0, 2.0).unwrap();
        assert_eq!(power.eval(0.1, 0.1, 0.0, Order::Value).unwrap(), 0.0);
        let expo = NonlinearitySpec::exponential(5.0);
        assert_eq!(expo.eval(0.1, 0.1, 0.0, Order::Value).unwrap(), 5.0);
    }

    #[test]
    fn tracking_objective() {
        let grid = UniformGrid::new(RectDomain::unit_square(), 4, 4).unwrap();
        let yd = ScalarField::zeros(&grid);
        let obj = ObjectiveSpec::tracking(yd, 1.0).unwrap();
        assert_eq!(obj.eval(&grid, 0.5, 0.5, 3.0, Order::Value), 4.5);
        assert_eq!(obj.eval(&grid, 0.5, 0.5, 3.0, Order::First), 3.0);
        assert_eq!(obj.eval(&grid, 0.5, 0.5, 3.0, Order::Second), 1.0);
        // at the target the value and slope vanish
        assert_eq!(obj.eval(&grid, 0.5, 0.5, 0.0, Order::Value), 0.0);
        assert_eq!(obj.eval(&grid, 0.5, 0.5, 0.0, Order::First), 0.0);
    }

    #[test]
    fn rejects_nonpositive_nu() {
        let grid = UniformGrid::new(RectDomain::unit_square(), 2, 2).unwrap();
        let yd = ScalarField::zeros(&grid);
        assert!(ObjectiveSpec::tracking(yd.clone(), 0.0).is_err());
        assert!(ObjectiveSpec::tracking(yd, -1.0).is_err());
    }
}
