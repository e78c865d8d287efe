//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantities (run with
//! `cargo test -p convopt --test acceptance -- --nocapture` to see
//! them).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use convopt_core::catalog;
use convopt_core::control::{
    critical_cone_curvature, eval_gradient, eval_objective, hessian_vector, optimality_residual,
    optimize_projected_gradient, optimize_semismooth_newton, OptOptions, OptStatus,
};
use convopt_core::mms::ManufacturedCase;
use convopt_core::state::StateOptions;
use convopt_core::verify::{
    comparison_suite, garding_diagnostic, manufactured_convergence, quadratic_growth_check,
};
use convopt_core::{
    Bounds, DiffusionTensor, Discretization, ProblemSpec, RectDomain, ScalarField, UniformGrid,
    VectorCoefficient,
};

const GRID: usize = 16;

fn report(criterion: &str, pass: bool, details: &str) {
    println!(
        "criterion {criterion}: {} ({details})",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn catalog_discretizations() -> Vec<(&'static str, Discretization)> {
    catalog::all(GRID)
        .unwrap()
        .into_iter()
        .map(|(name, spec)| (name, Discretization::new(spec).unwrap()))
        .collect()
}

fn random_control(disc: &Discretization, rng: &mut ChaCha8Rng) -> ScalarField {
    let mut v = ScalarField::zeros(disc.grid());
    for x in v.values_mut() {
        *x = rng.random_range(-1.0..1.0);
    }
    let n = disc.control_norm(&v);
    v.scaled(1.0 / n)
}

/// Criterion 1: on every catalog problem the discrete directional
/// derivative of J matches central differences at t = 1e-4 to a
/// relative error of 1e-8, within 10 s per problem.
#[test]
fn criterion_1_gradient_exactness() {
    let sopts = StateOptions::default();
    let t = 1e-4;
    let mut worst: f64 = 0.0;
    let mut slowest = 0.0f64;
    for (name, disc) in catalog_discretizations() {
        let clock = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let u = ScalarField::from_fn(disc.grid(), |x, y| 0.4 * (2.0 * x + y).sin());
        let g = eval_gradient(&disc, &u, &sopts).unwrap();
        for _ in 0..5 {
            let v = random_control(&disc, &mut rng);
            let dd = disc.control_inner(&g, &v);
            let jp = eval_objective(&disc, &u.add_scaled(t, &v), &sopts).unwrap();
            let jm = eval_objective(&disc, &u.add_scaled(-t, &v), &sopts).unwrap();
            let fd = (jp - jm) / (2.0 * t);
            let rel = (dd - fd).abs() / dd.abs().max(1.0);
            worst = worst.max(rel);
        }
        let elapsed = clock.elapsed().as_secs_f64();
        slowest = slowest.max(elapsed);
        assert!(elapsed < 10.0, "{name} took {elapsed:.1} s");
    }
    let pass = worst <= 1e-8;
    report(
        "1 (gradient exactness)",
        pass,
        &format!("worst relative mismatch {worst:.3e}, slowest problem {slowest:.2} s"),
    );
    assert!(pass);
}

/// Criterion 2: Hessian quadratic forms match second differences to
/// 1e-4 relative and the bilinear form is symmetric to 1e-9, within
/// 20 s.
#[test]
fn criterion_2_hessian_consistency_and_symmetry() {
    let clock = Instant::now();
    let sopts = StateOptions::default();
    let t = 1e-3;
    let mut worst_fd: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for (_name, disc) in catalog_discretizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let u = ScalarField::from_fn(disc.grid(), |x, y| 0.3 * (x - 2.0 * y).cos());
        let j0 = eval_objective(&disc, &u, &sopts).unwrap();
        for _ in 0..3 {
            let v = random_control(&disc, &mut rng);
            let w = random_control(&disc, &mut rng);
            let hv = hessian_vector(&disc, &u, &v, &sopts).unwrap();
            let hw = hessian_vector(&disc, &u, &w, &sopts).unwrap();
            let quad = disc.control_inner(&hv, &v);
            let jp = eval_objective(&disc, &u.add_scaled(t, &v), &sopts).unwrap();
            let jm = eval_objective(&disc, &u.add_scaled(-t, &v), &sopts).unwrap();
            let fd2 = (jp - 2.0 * j0 + jm) / (t * t);
            worst_fd = worst_fd.max((quad - fd2).abs() / quad.abs().max(1.0));
            worst_sym = worst_sym
                .max((disc.control_inner(&hv, &w) - disc.control_inner(&hw, &v)).abs());
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = worst_fd <= 1e-4 && worst_sym <= 1e-9 && elapsed < 20.0;
    report(
        "2 (hessian consistency/symmetry)",
        pass,
        &format!("worst FD mismatch {worst_fd:.3e}, worst symmetry gap {worst_sym:.3e}, {elapsed:.2} s"),
    );
    assert!(worst_fd <= 1e-4);
    assert!(worst_sym <= 1e-9);
    assert!(elapsed < 20.0);
}

/// Criterion 3: 50 seeded ordered control pairs per catalog problem
/// (all catalog fields have |b|_inf <= 5) keep the comparison
/// principle to 1e-9; an adversarial strong-convection case is
/// reported without being asserted.
#[test]
fn criterion_3_comparison_principle_suite() {
    let sopts = StateOptions::default();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut all_pass = true;
    for (name, disc) in catalog_discretizations() {
        let rep = comparison_suite(&disc, 50, 42, 1e-9, &sopts).unwrap();
        let v = rep.get("max_violation").unwrap();
        worst = worst.max(v);
        all_pass &= rep.pass;
        assert!(rep.pass, "{name}: comparison violation {v:.3e}");
    }

    // adversarial strong convection, recorded only
    let adversarial = |mag: f64| {
        let spec = ProblemSpec::tracking(
            RectDomain::unit_square(),
            8,
            8,
            DiffusionTensor::identity(),
            VectorCoefficient::constant(mag, 0.0),
            convopt_core::NonlinearitySpec::power(1.0, 2.0).unwrap(),
            |_, _| 0.0,
            1e-2,
            Bounds::new(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        comparison_suite(&Discretization::new(spec).unwrap(), 10, 42, 1e-9, &sopts).unwrap()
    };
    let adv30 = adversarial(30.0);
    let adv100 = adversarial(100.0);
    report(
        "3 (comparison principle)",
        all_pass,
        &format!(
            "catalog worst violation {worst:.3e}; adversarial recorded: |b|=30 violation {:?}, |b|=100 solver breakdowns {:?}",
            adv30.get("max_violation"),
            adv100.get("n_solve_failures")
        ),
    );
    assert!(all_pass);
}

/// Criterion 4: manufactured convergence for the semilinear problem
/// with div b != 0: L2 order 2.0 +- 0.4 and H1-seminorm order
/// 1.0 +- 0.3 over nx in {8, 16, 32, 64}, within 60 s.
#[test]
fn criterion_4_manufactured_convergence() {
    let clock = Instant::now();
    let study = manufactured_convergence(
        &ManufacturedCase::sine_power_divergent(),
        &[8, 16, 32, 64],
        &StateOptions::default(),
    )
    .unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let l2_ok = study
        .l2_orders
        .iter()
        .all(|o| o.map(|v| (1.6..=2.4).contains(&v)).unwrap_or(false));
    let h1_ok = study
        .h1_orders
        .iter()
        .all(|o| o.map(|v| (0.7..=1.3).contains(&v)).unwrap_or(false));
    let pass = l2_ok && h1_ok && elapsed < 60.0;
    report(
        "4 (manufactured convergence)",
        pass,
        &format!(
            "L2 orders {:?}, H1 orders {:?}, {elapsed:.2} s",
            study.l2_orders, study.h1_orders
        ),
    );
    assert!(l2_ok, "L2 orders {:?}", study.l2_orders);
    assert!(h1_ok, "H1 orders {:?}", study.h1_orders);
    assert!(elapsed < 60.0);
}

/// Criterion 5: after semismooth Newton convergence the projection
/// residual is below 1e-8 and the variational inequality holds on 100
/// random feasible directions with margin >= -1e-8.
#[test]
fn criterion_5_first_order_optimality_system() {
    let opts = OptOptions::default();
    let mut worst_residual: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for (name, disc) in catalog_discretizations() {
        let res = optimize_semismooth_newton(&disc, &ScalarField::zeros(disc.grid()), &opts)
            .unwrap();
        assert_eq!(res.status, OptStatus::Converged, "{name}");
        // independent re-evaluation with fresh solves
        let residual = optimality_residual(&disc, &res.control, &opts.state).unwrap();
        worst_residual = worst_residual.max(residual);

        let g = res
            .adjoint
            .add_scaled(disc.spec().objective.nu(), &res.control);
        let bounds = disc.spec().bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for _ in 0..100 {
            let mut u = ScalarField::zeros(disc.grid());
            for v in u.values_mut() {
                *v = rng.random_range(bounds.lower..=bounds.upper);
            }
            let mut d = u;
            d.axpy(-1.0, &res.control);
            worst_margin = worst_margin.min(disc.control_inner(&g, &d));
        }
    }
    let pass = worst_residual <= 1e-8 && worst_margin >= -1e-8;
    report(
        "5 (first-order optimality)",
        pass,
        &format!("worst projection residual {worst_residual:.3e}, worst VI margin {worst_margin:.3e}"),
    );
    assert!(worst_residual <= 1e-8);
    assert!(worst_margin >= -1e-8);
}

/// Criterion 6: projected gradient and semismooth Newton agree to
/// 1e-5 in the max norm on every catalog problem, and semismooth
/// Newton solves the unconstrained linear-quadratic case in at most 2
/// outer iterations, matching the monolithic dense KKT oracle.
#[test]
fn criterion_6_optimizer_cross_agreement() {
    let opts = OptOptions::default();
    let mut worst_gap: f64 = 0.0;
    for (name, disc) in catalog_discretizations() {
        let u0 = ScalarField::zeros(disc.grid());
        let pg = optimize_projected_gradient(&disc, &u0, &opts).unwrap();
        let ssn = optimize_semismooth_newton(&disc, &u0, &opts).unwrap();
        assert_eq!(pg.status, OptStatus::Converged, "{name}: PG");
        assert_eq!(ssn.status, OptStatus::Converged, "{name}: SSN");
        worst_gap = worst_gap.max(pg.control.max_diff(&ssn.control));
    }

    // unconstrained linear-quadratic vs the dense KKT oracle on 8x8
    let mut spec = catalog::linear_quadratic(8).unwrap();
    spec.bounds = Bounds::unconstrained();
    let disc = Discretization::new(spec).unwrap();
    let n = disc.grid().n_interior();
    let nu = disc.spec().objective.nu();
    let mut k = DMatrix::zeros(n, n);
    for (r, c, v) in disc.linear_op().triplets() {
        k[(r, c)] = v;
    }
    let mut m = DMatrix::zeros(n, n);
    for (r, c, v) in disc.mass().triplets() {
        m[(r, c)] = v;
    }
    let mut sys = DMatrix::zeros(2 * n, 2 * n);
    sys.view_mut((0, 0), (n, n)).copy_from(&k);
    sys.view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * (disc.cell_area() / nu)));
    sys.view_mut((n, 0), (n, n)).copy_from(&(-&m));
    sys.view_mut((n, n), (n, n)).copy_from(&k.transpose());
    let yd = DVector::from_column_slice(disc.spec().objective.target().values());
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(n, n).copy_from(&(-(&m * yd)));
    let sol = sys.lu().solve(&rhs).unwrap();
    let u_star = ScalarField::from_values(
        disc.grid(),
        sol.rows(n, n).iter().map(|p| -p / nu).collect(),
    )
    .unwrap();

    let ssn = optimize_semismooth_newton(&disc, &ScalarField::zeros(disc.grid()), &opts).unwrap();
    let oracle_gap = ssn.control.max_diff(&u_star);
    let pass = worst_gap <= 1e-5 && ssn.iterations <= 2 && oracle_gap <= 1e-6;
    report(
        "6 (optimizer cross-agreement)",
        pass,
        &format!(
            "worst PG/SSN gap {worst_gap:.3e}; LQ: {} iterations, KKT oracle gap {oracle_gap:.3e}",
            ssn.iterations
        ),
    );
    assert!(worst_gap <= 1e-5);
    assert!(ssn.iterations <= 2, "took {}", ssn.iterations);
    assert!(oracle_gap <= 1e-6);
}

/// Criterion 7: at the converged catalog controls the critical-cone
/// curvature is at least nu/2 and quadratic growth holds at radius 0.1
/// with kappa = half the measured curvature over 200 feasible probes.
#[test]
fn criterion_7_second_order_and_growth() {
    let opts = OptOptions::default();
    let mut min_curvature = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    for (name, disc) in catalog_discretizations() {
        let res = optimize_semismooth_newton(&disc, &ScalarField::zeros(disc.grid()), &opts)
            .unwrap();
        assert_eq!(res.status, OptStatus::Converged, "{name}");
        let curvature = critical_cone_curvature(&disc, &res.control, 100, 707, &opts).unwrap();
        assert!(!curvature.vacuous, "{name}: cone unexpectedly trivial");
        let min = curvature.min_quadratic_form.unwrap();
        min_curvature = min_curvature.min(min);
        assert!(
            min >= catalog::NU / 2.0,
            "{name}: cone curvature {min:.3e} below nu/2"
        );
        let growth = quadratic_growth_check(
            &disc,
            &res.control,
            200,
            0.1,
            0.5 * min,
            707,
            &opts,
        )
        .unwrap();
        worst_margin = worst_margin.min(growth.get("worst_margin").unwrap());
        assert!(growth.pass, "{name}: growth margin {worst_margin:.3e}");
    }
    let pass = min_curvature >= catalog::NU / 2.0;
    report(
        "7 (second-order/growth)",
        pass,
        &format!("min cone curvature {min_curvature:.4e} (nu/2 = {:.1e}), worst growth margin {worst_margin:.3e}",
            catalog::NU / 2.0),
    );
    assert!(pass);
}

/// Criterion 8: Garding diagnostic: exactly C = 0 for pure diffusion,
/// C = 0 up to 1e-10 for constant (skew) convection, and the
/// divergent case matches a dense generalized-eigenvalue oracle at
/// 8x8 to 1e-8.
#[test]
fn criterion_8_garding_diagnostic() {
    let grid = UniformGrid::new(RectDomain::unit_square(), 8, 8).unwrap();
    let zero_c = vec![0.0; grid.n_nodes()];
    let a = DiffusionTensor::identity();

    let pure = garding_diagnostic(&grid, &a, &VectorCoefficient::zero(), &zero_c).unwrap();
    let c_pure = pure.get("garding_c").unwrap();

    let skew =
        garding_diagnostic(&grid, &a, &VectorCoefficient::constant(3.0, -2.0), &zero_c).unwrap();
    let c_skew = skew.get("garding_c").unwrap();

    // div b = 10 on [0,2]^2 genuinely needs C > 0
    let grid2 = UniformGrid::new(RectDomain::new(0.0, 2.0, 0.0, 2.0).unwrap(), 8, 8).unwrap();
    let b_div = VectorCoefficient::affine([0.0, 5.0, 0.0], [0.0, 0.0, 5.0]);
    let zero_c2 = vec![0.0; grid2.n_nodes()];
    let divergent = garding_diagnostic(&grid2, &a, &b_div, &zero_c2).unwrap();
    let c_div = divergent.get("garding_c").unwrap();
    let gamma_div = divergent.get("gamma_h").unwrap();

    // dense oracle via Cholesky reduction
    let k_a = convopt_core::assemble::assemble_diffusion(&grid2, &a).unwrap();
    let n_b = convopt_core::assemble::assemble_convection(&grid2, &b_div).unwrap();
    let k_i = convopt_core::assemble::assemble_h1_stiffness(&grid2);
    let mass = convopt_core::assemble::assemble_mass(&grid2);
    let dense = |op: &convopt_core::SparseOperator| {
        let mut m = DMatrix::zeros(op.n(), op.n());
        for (r, c, v) in op.triplets() {
            m[(r, c)] = v;
        }
        m
    };
    let dense_min = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let chol = nalgebra::Cholesky::new(b.clone()).unwrap();
        let l = chol.l();
        let t1 = l.solve_lower_triangular(a).unwrap();
        let t2 = l.solve_lower_triangular(&t1.transpose()).unwrap();
        nalgebra::SymmetricEigen::new(t2)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    let sym = dense(&k_a.add_scaled(1.0, &n_b).unwrap().symmetric_part());
    let s = &sym - dense(&k_i) * 0.25;
    let c_oracle = (-dense_min(&s, &dense(&mass))).max(0.0);
    let gamma_oracle = dense_min(&(&sym + dense(&mass) * c_oracle), &dense(&k_i));

    let pass = c_pure == 0.0
        && c_skew <= 1e-10
        && c_div > 0.0
        && (c_div - c_oracle).abs() <= 1e-8 * c_oracle.max(1.0)
        && (gamma_div - gamma_oracle).abs() <= 1e-8 * gamma_oracle.abs().max(1.0);
    report(
        "8 (Garding diagnostic)",
        pass,
        &format!(
            "C(b=0) = {c_pure:.1e}, C(const b) = {c_skew:.3e}, C(div b=10) = {c_div:.6} vs oracle {c_oracle:.6}, gamma {gamma_div:.6} vs {gamma_oracle:.6}"
        ),
    );
    assert_eq!(c_pure, 0.0);
    assert!(c_skew <= 1e-10);
    assert!(c_div > 0.0);
    assert!((c_div - c_oracle).abs() <= 1e-8 * c_oracle.max(1.0));
    assert!((gamma_div - gamma_oracle).abs() <= 1e-8 * gamma_oracle.abs().max(1.0));
}

/// Criterion 9: identical config and seed produce byte-identical
/// report artifacts across two consecutive runs of the binary
/// (the manifest carries the volatile timings and is excluded).
#[test]
fn criterion_9_reproducibility() {
    let tmp = tempfile::TempDir::new().unwrap();
    let config_text = r#"{
        "problem": {
            "grid": {"nx": 8},
            "convection": {"kind": "rotation", "scale": 1.0},
            "nonlinearity": {"kind": "power", "r": 2.0},
            "objective": {"target": {"kind": "sine", "amplitude": 0.5, "kx": 2}, "nu": 1e-2},
            "bounds": {"alpha": -1.0, "beta": 1.0}
        },
        "command": {"task": "optimize"}
    }"#;
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, config_text).unwrap();

    let mut run = |dir: &str| {
        let out = tmp.path().join(dir);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_convopt"))
            .args(["optimize", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "42"])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        out
    };
    let a = run("a");
    let b = run("b");

    // the optimizer report records the converged status
    let opt_report = std::fs::read_to_string(a.join("optimize_report.json")).unwrap();
    assert!(
        opt_report.contains("\"status\": \"converged\""),
        "{opt_report}"
    );

    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    assert!(!names.is_empty());
    let mut all_equal = true;
    for name in &names {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        if fa != fb {
            all_equal = false;
        }
    }
    report(
        "9 (reproducibility)",
        all_equal,
        &format!("{} artifacts compared byte-for-byte", names.len()),
    );
    assert!(all_equal);
}
