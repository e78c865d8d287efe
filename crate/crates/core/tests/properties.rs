//! Property tests for the pure operations: projection, assembly
//! linearity, monotonicity of the nonlinearity catalog.

use proptest::prelude::*;

use convopt_core::assemble::{assemble_load, assemble_mass};
use convopt_core::control::project_box;
use convopt_core::nonlinearity::Order;
use convopt_core::{NonlinearitySpec, RectDomain, ScalarField, UniformGrid};

fn grid() -> UniformGrid {
    UniformGrid::new(RectDomain::unit_square(), 5, 4).unwrap()
}

proptest! {
    #[test]
    fn projection_clamps_and_is_idempotent(
        values in proptest::collection::vec(-10.0f64..10.0, 12),
        a in -5.0f64..0.0,
        width in 0.1f64..5.0,
    ) {
        let g = grid();
        let b = a + width;
        let u = ScalarField::from_values(&g, values).unwrap();
        let p = project_box(&u, a, b).unwrap();
        for (&orig, &v) in u.values().iter().zip(p.values()) {
            prop_assert!(v >= a && v <= b);
            if orig >= a && orig <= b {
                prop_assert_eq!(orig, v);
            }
        }
        let pp = project_box(&p, a, b).unwrap();
        prop_assert_eq!(p, pp);
    }

    #[test]
    fn load_is_linear_in_the_data(
        g1 in proptest::collection::vec(-3.0f64..3.0, 30),
        g2 in proptest::collection::vec(-3.0f64..3.0, 30),
        a in -4.0f64..4.0,
        b in -4.0f64..4.0,
    ) {
        let g = grid();
        prop_assert_eq!(g.n_nodes(), 30);
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let f1 = assemble_load(&g, &g1).unwrap();
        let f2 = assemble_load(&g, &g2).unwrap();
        let fc = assemble_load(&g, &combo).unwrap();
        let direct = f1.scaled(a).add_scaled(b, &f2);
        prop_assert!(fc.max_diff(&direct) <= 1e-12);
    }

    #[test]
    fn catalog_slopes_are_nonnegative(
        a0 in 0.0f64..5.0,
        r in 1.0f64..4.0,
        y in -20.0f64..20.0,
        x in 0.0f64..1.0,
    ) {
        for spec in [
            NonlinearitySpec::power(a0, r).unwrap(),
            NonlinearitySpec::exponential(a0),
            NonlinearitySpec::zero(),
        ] {
            let slope = spec.eval(x, 1.0 - x, y, Order::First).unwrap();
            prop_assert!(slope >= 0.0, "slope {} for y={}", slope, y);
        }
    }

    #[test]
    fn mass_quadratic_form_nonnegative(
        values in proptest::collection::vec(-10.0f64..10.0, 12),
    ) {
        let g = grid();
        let m = assemble_mass(&g);
        prop_assert!(m.quadratic_form(&values) >= -1e-12);
    }
}
