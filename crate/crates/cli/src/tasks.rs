//! Task dispatch: builds the discrete problem, runs the requested
//! operation and writes artifacts plus the run manifest.
//!
//! Exit-code contract: 0 for pass/converged, 1 for a failed check or
//! non-convergence, 2 for usage errors (handled by the caller).

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use convopt_core::control::{
    critical_cone_curvature, optimize_projected_gradient, optimize_semismooth_newton, OptResult,
};
use convopt_core::mms::ManufacturedCase;
use convopt_core::nonlinearity::Order;
use convopt_core::state::solve_state_newton;
use convopt_core::verify::{
    comparison_suite, garding_diagnostic, gradient_fd_check, hessian_fd_check, ConvergenceStudy,
};
use convopt_core::{Discretization, Error as CoreError, ScalarField};

use crate::config::{
    CommandConfig, FieldFormat, OptimizerConfig, RunConfig,
};
use crate::export;
use crate::manifest::RunManifest;

pub struct TaskOutcome {
    pub exit: i32,
    pub status: String,
}

struct Writer<'a> {
    dir: &'a Path,
    formats: &'a [FieldFormat],
    digest: String,
    seed: u64,
    artifacts: Vec<String>,
}

impl<'a> Writer<'a> {
    fn field(&mut self, name: &str, disc: &Discretization, field: &ScalarField) -> Result<()> {
        if self.formats.contains(&FieldFormat::Csv) {
            let file = format!("{name}.csv");
            export::write_field_csv(&self.dir.join(&file), disc.grid(), field)?;
            self.artifacts.push(file);
        }
        if self.formats.contains(&FieldFormat::VtkLegacy) {
            let file = format!("{name}.vtk");
            export::write_field_vtk(&self.dir.join(&file), disc.grid(), field, name)?;
            self.artifacts.push(file);
        }
        Ok(())
    }

    fn report<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<()> {
        let file = format!("{name}.json");
        let wrapped = json!({
            "config_digest": self.digest,
            "seed": self.seed,
            "report": payload,
        });
        export::write_json(&self.dir.join(&file), &wrapped)?;
        self.artifacts.push(file);
        Ok(())
    }
}

/// Runs one configured task. Solver breakdowns and failed checks are
/// reported through the exit code and manifest, not as errors; the
/// `Err` branch is reserved for setup and I/O problems.
pub fn run(
    cfg: &RunConfig,
    seed: u64,
    out_dir: &Path,
    thread_cap: Option<usize>,
) -> Result<TaskOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut manifest = RunManifest::new(cfg, seed, thread_cap);
    let mut writer = Writer {
        dir: out_dir,
        formats: &cfg.output.formats,
        digest: manifest.config_digest.clone(),
        seed,
        artifacts: Vec::new(),
    };

    let t_total = Instant::now();
    let outcome = dispatch(cfg, seed, &mut writer, &mut manifest)?;
    manifest
        .timings_ms
        .insert("total".into(), t_total.elapsed().as_secs_f64() * 1e3);

    manifest.status = outcome.status.clone();
    manifest.exit_code = outcome.exit;
    manifest.artifacts = writer.artifacts.clone();
    export::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(outcome)
}

fn dispatch(
    cfg: &RunConfig,
    seed: u64,
    w: &mut Writer,
    manifest: &mut RunManifest,
) -> Result<TaskOutcome> {
    let sopts = cfg.solver.state_options();
    let oopts = cfg.solver.opt_options();

    let t_setup = Instant::now();
    let disc = match cfg.build_problem().map(Discretization::new) {
        Ok(Ok(d)) => d,
        Ok(Err(e)) => return fail(format!("assembly failed: {e}")),
        Err(e) => return fail(format!("{e}")),
    };
    manifest
        .timings_ms
        .insert("setup".into(), t_setup.elapsed().as_secs_f64() * 1e3);

    match &cfg.command {
        CommandConfig::SolveState { control } => {
            let u = cfg.problem.sample_control(disc.grid(), control);
            w.field("control", &disc, &u)?;
            match solve_state_newton(&disc, &u, &sopts) {
                Ok(sol) => {
                    w.field("state", &disc, &sol.y)?;
                    w.report(
                        "solve_report",
                        &json!({
                            "converged": true,
                            "newton_iterations": sol.newton_iterations,
                            "residual_norm": sol.residual_norm,
                            "globalization_used": sol.globalization_used,
                        }),
                    )?;
                    pass("state solved")
                }
                Err(e) => fail(format!("state solve failed: {e}")),
            }
        }

        CommandConfig::Optimize { optimizer, initial } => {
            let u0 = cfg.problem.sample_control(disc.grid(), initial);
            let run = match optimizer {
                OptimizerConfig::SemismoothNewton => optimize_semismooth_newton(&disc, &u0, &oopts),
                OptimizerConfig::ProjectedGradient => {
                    optimize_projected_gradient(&disc, &u0, &oopts)
                }
            };
            match run {
                Ok(res) => {
                    write_opt_result(w, &disc, &res)?;
                    if res.converged() {
                        pass(format!("converged in {} outer iterations", res.iterations))
                    } else {
                        fail(format!("optimizer stopped: {:?}", res.status))
                    }
                }
                Err(e) => fail(format!("optimizer failed: {e}")),
            }
        }

        CommandConfig::CheckGradient {
            directions,
            control,
        } => {
            let u = cfg.problem.sample_control(disc.grid(), control);
            match gradient_fd_check(&disc, &u, *directions, seed, &sopts) {
                Ok(report) => {
                    let ok = report.pass;
                    w.report("gradient_check", &report)?;
                    verdict(ok, "gradient check")
                }
                Err(e) => fail(format!("gradient check failed to run: {e}")),
            }
        }

        CommandConfig::CheckHessian { control } => {
            let u = cfg.problem.sample_control(disc.grid(), control);
            match hessian_fd_check(&disc, &u, seed, &sopts) {
                Ok(report) => {
                    let ok = report.pass;
                    w.report("hessian_check", &report)?;
                    verdict(ok, "hessian check")
                }
                Err(CoreError::NotTwiceDifferentiable(msg)) => {
                    fail(format!("hessian check not applicable: {msg}"))
                }
                Err(e) => fail(format!("hessian check failed to run: {e}")),
            }
        }

        CommandConfig::ComparisonSuite { n_pairs, tolerance } => {
            match comparison_suite(&disc, *n_pairs, seed, *tolerance, &sopts) {
                Ok(report) => {
                    let ok = report.pass;
                    w.report("comparison_suite", &report)?;
                    verdict(ok, "comparison suite")
                }
                Err(e) => fail(format!("comparison suite failed to run: {e}")),
            }
        }

        CommandConfig::ConvergenceStudy { case, grids } => {
            let case = ManufacturedCase::by_name(case).map_err(|e| anyhow::anyhow!("{e}"))?;
            match convopt_core::verify::manufactured_convergence(&case, grids, &sopts) {
                Ok(study) => {
                    let report = StudyReport::evaluate(study);
                    let ok = report.pass;
                    w.report("convergence_study", &report)?;
                    let files = export::write_convergence_plot(w.dir, &report.study)?;
                    w.artifacts.extend(files);
                    verdict(ok, "convergence study")
                }
                Err(e) => fail(format!("convergence study failed: {e}")),
            }
        }

        CommandConfig::DiagnoseCoercivity {} => {
            let spec = disc.spec();
            let grid = disc.grid();
            // reaction weight of the linearization at y = 0
            let mut c_nodal = Vec::with_capacity(grid.n_nodes());
            for iy in 0..=grid.ny() {
                for ix in 0..=grid.nx() {
                    let (x, y) = grid.node_coords(ix, iy);
                    c_nodal.push(
                        spec.nonlinearity
                            .eval(x, y, 0.0, Order::First)
                            .map_err(|e| anyhow::anyhow!("{e}"))?,
                    );
                }
            }
            match garding_diagnostic(grid, &spec.diffusion, &spec.convection, &c_nodal) {
                Ok(report) => {
                    let ok = report.pass;
                    w.report("coercivity", &report)?;
                    verdict(ok, "coercivity diagnostic")
                }
                Err(e) => fail(format!("coercivity diagnostic failed: {e}")),
            }
        }

        CommandConfig::GrowthCheck {
            n_probes,
            radius,
            cone_samples,
        } => {
            let u0 = ScalarField::zeros(disc.grid());
            let res = match optimize_semismooth_newton(&disc, &u0, &oopts) {
                Ok(r) => r,
                Err(e) => return fail(format!("optimizer failed: {e}")),
            };
            write_opt_result(w, &disc, &res)?;
            if !res.converged() {
                return fail(format!("optimizer stopped: {:?}", res.status));
            }
            let curvature =
                match critical_cone_curvature(&disc, &res.control, *cone_samples, seed, &oopts) {
                    Ok(c) => c,
                    Err(e) => return fail(format!("curvature survey failed: {e}")),
                };
            w.report("curvature", &curvature)?;
            if curvature.vacuous {
                return pass("critical cone is trivial; growth vacuously positive");
            }
            let min = curvature.min_quadratic_form.unwrap_or(f64::NEG_INFINITY);
            if !(min > 0.0) {
                return fail(format!(
                    "second-order condition fails: min cone curvature {min:.3e}"
                ));
            }
            let kappa_hat = 0.5 * min;
            match convopt_core::verify::quadratic_growth_check(
                &disc,
                &res.control,
                *n_probes,
                *radius,
                kappa_hat,
                seed,
                &oopts,
            ) {
                Ok(report) => {
                    let ok = report.pass;
                    w.report("growth", &report)?;
                    verdict(ok, "quadratic growth check")
                }
                Err(e) => fail(format!("growth check failed to run: {e}")),
            }
        }
    }
}

fn write_opt_result(w: &mut Writer, disc: &Discretization, res: &OptResult) -> Result<()> {
    w.field("control", disc, &res.control)?;
    w.field("state", disc, &res.state)?;
    w.field("adjoint", disc, &res.adjoint)?;
    w.report("optimize_report", res)
}

/// Convergence study with the pass verdict against the expected orders.
#[derive(Serialize)]
struct StudyReport {
    study: ConvergenceStudy,
    l2_band: [f64; 2],
    h1_band: [f64; 2],
    pass: bool,
}

impl StudyReport {
    fn evaluate(study: ConvergenceStudy) -> Self {
        let l2_band = [1.6, 2.4];
        let h1_band = [0.7, 1.3];
        let in_band = |orders: &[Option<f64>], band: [f64; 2]| {
            orders
                .iter()
                .all(|o| o.is_none_or(|v| v >= band[0] && v <= band[1]))
        };
        let pass = in_band(&study.l2_orders, l2_band) && in_band(&study.h1_orders, h1_band);
        Self {
            study,
            l2_band,
            h1_band,
            pass,
        }
    }
}

fn pass(status: impl Into<String>) -> Result<TaskOutcome> {
    Ok(TaskOutcome {
        exit: 0,
        status: status.into(),
    })
}

fn fail(status: impl Into<String>) -> Result<TaskOutcome> {
    Ok(TaskOutcome {
        exit: 1,
        status: status.into(),
    })
}

fn verdict(ok: bool, what: &str) -> Result<TaskOutcome> {
    if ok {
        pass(format!("{what} passed"))
    } else {
        fail(format!("{what} failed"))
    }
}
