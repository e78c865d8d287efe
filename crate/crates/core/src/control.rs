//! Reduced-space optimization of the control problem.
//!
//! The reduced objective is `J(u) = 1/2 |y_u - y_d|^2_M + nu/2 |u|^2_D`
//! with `y_u` the discrete state, `M` the consistent mass on the state
//! space and `D = hx hy I` the lumped Gram of the control space.
//! Because the adjoint uses the exact transpose of the discrete
//! linearized operator and the control enters the state equation
//! through `D`, the reduced gradient is exactly the nodal field
//! `g = phi_u + nu u` paired through `D`, the pointwise projection
//! `u = Proj(-phi/nu)` is the exact discrete first-order condition,
//! and a Hessian-vector product needs one linearized and one
//! adjoint-type solve on the same factorization.
//!
//! Two optimizers are provided: projected gradient with a
//! Barzilai-Borwein step and Armijo backtracking, and a primal-dual
//! active-set semismooth Newton method whose inactive block is solved
//! by conjugate gradients on Hessian actions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::problem::{Bounds, Discretization};
use crate::sensitivity::Linearization;
use crate::state::{solve_state_newton, solve_state_newton_from, StateOptions};

#[derive(Clone, Debug)]
pub struct OptOptions {
    pub max_outer: usize,
    /// Tolerance on the projection-formula residual
    /// `|u - Proj(-phi/nu)|_{L2,h}`.
    pub tol_opt: f64,
    pub armijo_c: f64,
    pub armijo_factor: f64,
    pub min_step: f64,
    /// Active-set tie tolerance; ties go to the inactive set.
    pub tau_active: f64,
    /// Relative tolerance of the inner CG solve on the reduced Newton
    /// system.
    pub cg_tol: f64,
    pub cg_max: usize,
    pub state: StateOptions,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            tol_opt: 1e-9,
            armijo_c: 1e-4,
            armijo_factor: 0.5,
            min_step: (2.0f64).powi(-30),
            tau_active: 1e-12,
            cg_tol: 1e-11,
            cg_max: 2000,
            // inner solves need headroom below tol_opt: the adjoint
            // inherits the state residual and the projection residual
            // divides it by nu
            state: StateOptions {
                tol_state: 1e-12,
                ..StateOptions::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Converged,
    MaxIter,
    LineSearchFailure,
}

/// Optimizer output: the final triple (control, state, adjoint) and the
/// iteration history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptResult {
    pub control: ScalarField,
    pub state: ScalarField,
    pub adjoint: ScalarField,
    pub objective_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub status: OptStatus,
}

impl OptResult {
    pub fn converged(&self) -> bool {
        self.status == OptStatus::Converged
    }
}

/// Discrete objective value given the already-solved state.
pub(crate) fn objective_value(disc: &Discretization, u: &ScalarField, y: &ScalarField) -> f64 {
    let mut misfit = y.clone();
    misfit.axpy(-1.0, disc.spec().objective.target());
    let nu = disc.spec().objective.nu();
    0.5 * disc.l2_inner(&misfit, &misfit) + 0.5 * nu * disc.control_inner(u, u)
}

/// Reduced objective `J(u)`; solves the state internally.
pub fn eval_objective(disc: &Discretization, u: &ScalarField, sopts: &StateOptions) -> Result<f64> {
    let sol = solve_state_newton(disc, u, sopts)?;
    Ok(objective_value(disc, u, &sol.y))
}

/// Reduced gradient field `g = phi_u + nu u`. The directional
/// derivative of `J` at `u` in direction `v` is the discrete L2
/// pairing `<g, v>` of the control space.
pub fn eval_gradient(
    disc: &Discretization,
    u: &ScalarField,
    sopts: &StateOptions,
) -> Result<ScalarField> {
    let sol = solve_state_newton(disc, u, sopts)?;
    let lin = Linearization::at(disc, &sol.y)?;
    let phi = lin.adjoint_for_objective();
    Ok(phi.add_scaled(disc.spec().objective.nu(), u))
}

/// Hessian action carrier at a fixed control: reuses one linearization
/// factorization for all products.
pub(crate) struct ReducedHessian<'a, 'd> {
    lin: &'a Linearization<'d>,
    disc: &'d Discretization,
    /// `M phi`, entering the curvature term `f''(y) z (M phi)`
    m_phi: Vec<f64>,
    /// nodal `f''(x, y)`
    fpp: Vec<f64>,
    nu: f64,
}

impl<'a, 'd> ReducedHessian<'a, 'd> {
    pub fn new(
        disc: &'d Discretization,
        lin: &'a Linearization<'d>,
        phi: &ScalarField,
    ) -> Result<Self> {
        let fpp = lin.curvature_weights()?;
        let m_phi = disc.mass().matvec(phi.values());
        Ok(Self {
            lin,
            disc,
            m_phi,
            fpp,
            nu: disc.spec().objective.nu(),
        })
    }

    /// `h(v)` with `<h(v), w>_D = J''(u)(v, w)`:
    /// one linearized solve, one transpose solve.
    pub fn apply(&self, v: &ScalarField) -> ScalarField {
        let z = self.lin.solve_control(v);
        // tracking objective: d2L/dy2 = 1, so the state-curvature load
        // is M z minus the nonlinearity curvature f'' z (M phi)
        let mut load = self.disc.mass().matvec(z.values());
        for ((l, f), (zi, mp)) in load
            .iter_mut()
            .zip(&self.fpp)
            .zip(z.values().iter().zip(&self.m_phi))
        {
            *l -= f * zi * mp;
        }
        let q = self.lin.solve_adjoint_load(&load);
        q.add_scaled(self.nu, v)
    }
}

/// Hessian-vector product `h` with `<h, w> = J''(u)(v, w)` for all
/// `w` in the control pairing. Requires a twice-differentiable
/// nonlinearity.
pub fn hessian_vector(
    disc: &Discretization,
    u: &ScalarField,
    v: &ScalarField,
    sopts: &StateOptions,
) -> Result<ScalarField> {
    let sol = solve_state_newton(disc, u, sopts)?;
    let lin = Linearization::at(disc, &sol.y)?;
    let phi = lin.adjoint_for_objective();
    let rh = ReducedHessian::new(disc, &lin, &phi)?;
    Ok(rh.apply(v))
}

/// Nodal clamp of a control to the box `[alpha, beta]`.
pub fn project_box(u: &ScalarField, alpha: f64, beta: f64) -> Result<ScalarField> {
    let bounds = Bounds::new(alpha, beta)?;
    Ok(bounds.project_field(u))
}

pub(crate) struct KktPoint {
    pub y: ScalarField,
    pub phi: ScalarField,
    pub gradient: ScalarField,
    pub objective: f64,
    pub residual: f64,
}

pub(crate) fn kkt_point(
    disc: &Discretization,
    u: &ScalarField,
    warm: Option<&ScalarField>,
    sopts: &StateOptions,
) -> Result<KktPoint> {
    let sol = solve_state_newton_from(disc, u, warm, sopts)?;
    kkt_point_from_state(disc, u, sol.y)
}

pub(crate) fn kkt_point_from_state(
    disc: &Discretization,
    u: &ScalarField,
    y: ScalarField,
) -> Result<KktPoint> {
    let lin = Linearization::at(disc, &y)?;
    let phi = lin.adjoint_for_objective();
    let nu = disc.spec().objective.nu();
    let gradient = phi.add_scaled(nu, u);
    let objective = objective_value(disc, u, &y);
    let residual = projection_residual(disc, u, &phi);
    Ok(KktPoint {
        y,
        phi,
        gradient,
        objective,
        residual,
    })
}

fn projection_residual(disc: &Discretization, u: &ScalarField, phi: &ScalarField) -> f64 {
    let bounds = disc.spec().bounds;
    let nu = disc.spec().objective.nu();
    let mut r = u.clone();
    for (ri, pi) in r.values_mut().iter_mut().zip(phi.values()) {
        *ri -= bounds.project(-pi / nu);
    }
    disc.control_norm(&r)
}

/// First-order optimality residual `|u - Proj(-phi_u / nu)|_{L2,h}`;
/// zero exactly when the discrete projection formula holds. For an
/// unconstrained box this reduces to `|u + phi_u / nu|_{L2,h}`.
pub fn optimality_residual(
    disc: &Discretization,
    u: &ScalarField,
    sopts: &StateOptions,
) -> Result<f64> {
    let sol = solve_state_newton(disc, u, sopts)?;
    let lin = Linearization::at(disc, &sol.y)?;
    let phi = lin.adjoint_for_objective();
    Ok(projection_residual(disc, u, &phi))
}

/// Projected gradient descent with Barzilai-Borwein step initialization
/// and Armijo backtracking; the objective history is nonincreasing.
pub fn optimize_projected_gradient(
    disc: &Discretization,
    u0: &ScalarField,
    opts: &OptOptions,
) -> Result<OptResult> {
    let bounds = disc.spec().bounds;
    let mut u = bounds.project_field(u0);
    let mut point = kkt_point(disc, &u, None, &opts.state)?;
    let mut objective_history = vec![point.objective];
    let mut residual_history = vec![point.residual];
    let mut step = 1.0;
    let mut prev: Option<(ScalarField, ScalarField)> = None;

    for iter in 0..opts.max_outer {
        if point.residual <= opts.tol_opt {
            return Ok(OptResult {
                control: u,
                state: point.y,
                adjoint: point.phi,
                objective_history,
                residual_history,
                iterations: iter,
                status: OptStatus::Converged,
            });
        }

        if let Some((du, dg)) = &prev {
            let num = disc.control_inner(du, du);
            let den = disc.control_inner(du, dg);
            step = if den > 0.0 {
                (num / den).clamp(1e-6, 1e6)
            } else {
                1.0
            };
        }

        let mut s = step;
        let mut accepted = None;
        // accept sufficient decrease up to the roundoff resolution of J:
        // near the optimum the true decrease drops below machine noise
        // while the projected fixed-point step still contracts
        let noise = 4.0 * f64::EPSILON * (1.0 + point.objective.abs());
        while s >= opts.min_step {
            let trial = bounds.project_field(&u.add_scaled(-s, &point.gradient));
            let mut d = trial.clone();
            d.axpy(-1.0, &u);
            let dn2 = disc.control_inner(&d, &d);
            if dn2 == 0.0 {
                break;
            }
            let sol = solve_state_newton_from(disc, &trial, Some(&point.y), &opts.state)?;
            let j_trial = objective_value(disc, &trial, &sol.y);
            if j_trial <= point.objective - (opts.armijo_c / s) * dn2 + noise {
                accepted = Some((trial, sol.y));
                break;
            }
            s *= opts.armijo_factor;
        }

        let Some((u_new, y_new)) = accepted else {
            return Ok(OptResult {
                control: u,
                state: point.y,
                adjoint: point.phi,
                objective_history,
                residual_history,
                iterations: iter,
                status: OptStatus::LineSearchFailure,
            });
        };

        let new_point = kkt_point_from_state(disc, &u_new, y_new)?;
        let mut du = u_new.clone();
        du.axpy(-1.0, &u);
        let mut dg = new_point.gradient.clone();
        dg.axpy(-1.0, &point.gradient);
        prev = Some((du, dg));
        u = u_new;
        point = new_point;
        objective_history.push(point.objective);
        residual_history.push(point.residual);
    }

    Ok(OptResult {
        control: u,
        state: point.y,
        adjoint: point.phi,
        objective_history,
        residual_history,
        iterations: opts.max_outer,
        status: OptStatus::MaxIter,
    })
}

/// Primal-dual active-set semismooth Newton method on the projection
/// formula `u = Proj(-phi_u / nu)`.
///
/// Nodes whose unconstrained candidate `-phi/nu` violates a bound by
/// more than the tie tolerance are fixed to that bound; the inactive
/// block solves the reduced Newton system by conjugate gradients on
/// Hessian-vector actions. When CG meets a direction of nonpositive
/// curvature the step degrades to a projected-gradient step.
pub fn optimize_semismooth_newton(
    disc: &Discretization,
    u0: &ScalarField,
    opts: &OptOptions,
) -> Result<OptResult> {
    if !disc.spec().nonlinearity.is_twice_differentiable() {
        return Err(Error::NotTwiceDifferentiable(
            "semismooth Newton needs a C2 nonlinearity".into(),
        ));
    }
    let bounds = disc.spec().bounds;
    let nu = disc.spec().objective.nu();
    let mut u = bounds.project_field(u0);
    let mut warm: Option<ScalarField> = None;
    let mut objective_history = Vec::new();
    let mut residual_history = Vec::new();

    for iter in 0..opts.max_outer {
        let sol = solve_state_newton_from(disc, &u, warm.as_ref(), &opts.state)?;
        let lin = Linearization::at(disc, &sol.y)?;
        let phi = lin.adjoint_for_objective();
        let gradient = phi.add_scaled(nu, &u);
        let objective = objective_value(disc, &u, &sol.y);
        let residual = projection_residual(disc, &u, &phi);
        objective_history.push(objective);
        residual_history.push(residual);

        if residual <= opts.tol_opt {
            return Ok(OptResult {
                control: u,
                state: sol.y,
                adjoint: phi,
                objective_history,
                residual_history,
                iterations: iter,
                status: OptStatus::Converged,
            });
        }

        let n = u.len();
        let mut lower_active = vec![false; n];
        let mut upper_active = vec![false; n];
        for (i, pi) in phi.values().iter().enumerate() {
            let q = -pi / nu;
            if bounds.is_lower_finite() && q - bounds.lower < -opts.tau_active {
                lower_active[i] = true;
            } else if bounds.is_upper_finite() && q - bounds.upper > opts.tau_active {
                upper_active[i] = true;
            }
        }
        let inactive: Vec<bool> = (0..n)
            .map(|i| !lower_active[i] && !upper_active[i])
            .collect();

        let mut delta_active = ScalarField::zeros(disc.grid());
        for i in 0..n {
            if lower_active[i] {
                delta_active.values_mut()[i] = bounds.lower - u.values()[i];
            } else if upper_active[i] {
                delta_active.values_mut()[i] = bounds.upper - u.values()[i];
            }
        }

        let rh = ReducedHessian::new(disc, &lin, &phi)?;
        let h_da = rh.apply(&delta_active);
        let mut rhs = ScalarField::zeros(disc.grid());
        for i in 0..n {
            if inactive[i] {
                rhs.values_mut()[i] = -gradient.values()[i] - h_da.values()[i];
            }
        }

        let (delta_inactive, lost_positivity) =
            cg_reduced(&rh, disc, &inactive, &rhs, opts.cg_tol, opts.cg_max);

        if lost_positivity {
            // projected-gradient safeguard step
            let mut s = 1.0;
            let mut moved = false;
            let noise = 4.0 * f64::EPSILON * (1.0 + objective.abs());
            while s >= opts.min_step {
                let trial = bounds.project_field(&u.add_scaled(-s, &gradient));
                let mut d = trial.clone();
                d.axpy(-1.0, &u);
                let dn2 = disc.control_inner(&d, &d);
                if dn2 == 0.0 {
                    break;
                }
                let tsol = solve_state_newton_from(disc, &trial, Some(&sol.y), &opts.state)?;
                let j_trial = objective_value(disc, &trial, &tsol.y);
                if j_trial <= objective - (opts.armijo_c / s) * dn2 + noise {
                    u = trial;
                    warm = Some(tsol.y);
                    moved = true;
                    break;
                }
                s *= opts.armijo_factor;
            }
            if !moved {
                return Ok(OptResult {
                    control: u,
                    state: sol.y,
                    adjoint: phi,
                    objective_history,
                    residual_history,
                    iterations: iter,
                    status: OptStatus::LineSearchFailure,
                });
            }
        } else {
            u.axpy(1.0, &delta_active);
            u.axpy(1.0, &delta_inactive);
            warm = Some(sol.y);
        }
    }

    // report the last evaluated point
    let sol = solve_state_newton_from(disc, &u, warm.as_ref(), &opts.state)?;
    let lin = Linearization::at(disc, &sol.y)?;
    let phi = lin.adjoint_for_objective();
    let residual = projection_residual(disc, &u, &phi);
    objective_history.push(objective_value(disc, &u, &sol.y));
    residual_history.push(residual);
    Ok(OptResult {
        control: u,
        state: sol.y,
        adjoint: phi,
        objective_history,
        residual_history,
        iterations: opts.max_outer,
        status: if residual <= opts.tol_opt {
            OptStatus::Converged
        } else {
            OptStatus::MaxIter
        },
    })
}

/// Conjugate gradients on the inactive block of the reduced Hessian in
/// the discrete L2 inner product. Returns the step and whether a
/// direction of nonpositive curvature was met.
fn cg_reduced(
    rh: &ReducedHessian,
    disc: &Discretization,
    inactive: &[bool],
    rhs: &ScalarField,
    tol_rel: f64,
    max_iter: usize,
) -> (ScalarField, bool) {
    let mask = |f: &mut ScalarField| {
        for (v, &keep) in f.values_mut().iter_mut().zip(inactive) {
            if !keep {
                *v = 0.0;
            }
        }
    };
    let mut x = ScalarField::zeros(disc.grid());
    let mut r = rhs.clone();
    mask(&mut r);
    let rhs_norm = disc.control_norm(&r);
    if rhs_norm == 0.0 {
        return (x, false);
    }
    let mut p = r.clone();
    let mut rr = disc.control_inner(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol_rel * rhs_norm {
            break;
        }
        let mut hp = rh.apply(&p);
        mask(&mut hp);
        let php = disc.control_inner(&p, &hp);
        if php <= 1e-14 * disc.control_inner(&p, &p) {
            return (x, true);
        }
        let alpha = rr / php;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &hp);
        let rr_new = disc.control_inner(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p = r.add_scaled(beta, &p);
    }
    (x, false)
}

/// Curvature survey over the discrete critical cone at a stationary
/// control.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// `min J''(u)(v, v)` over unit directions in the cone; `None` when
    /// the cone is trivial.
    pub min_quadratic_form: Option<f64>,
    pub sampled_min: Option<f64>,
    /// Smallest Ritz value of the reduced Hessian on the inactive
    /// subspace.
    pub rayleigh_min: Option<f64>,
    pub n_samples: usize,
    pub n_active: usize,
    pub n_strongly_active: usize,
    /// Cone is `{0}`: every node is strongly active.
    pub vacuous: bool,
    pub seed: u64,
}

/// Samples the discrete critical cone and minimizes the Rayleigh
/// quotient of the reduced Hessian over the inactive subspace.
///
/// Cone construction: directions vanish where `|phi + nu u|` exceeds
/// the tie tolerance (strongly active nodes), are sign-constrained on
/// the remaining active-bound nodes and free elsewhere. All sampled
/// directions have unit discrete L2 norm.
pub fn critical_cone_curvature(
    disc: &Discretization,
    u_bar: &ScalarField,
    n_samples: usize,
    seed: u64,
    opts: &OptOptions,
) -> Result<CurvatureReport> {
    let sol = solve_state_newton(disc, u_bar, &opts.state)?;
    let lin = Linearization::at(disc, &sol.y)?;
    let phi = lin.adjoint_for_objective();
    let residual = projection_residual(disc, u_bar, &phi);
    if residual > opts.tol_opt {
        return Err(Error::invalid(format!(
            "critical_cone_curvature needs a stationary control: residual {residual:.3e} > {:.3e}",
            opts.tol_opt
        )));
    }
    let bounds = disc.spec().bounds;
    let nu = disc.spec().objective.nu();
    let gradient = phi.add_scaled(nu, u_bar);
    let rh = ReducedHessian::new(disc, &lin, &phi)?;

    let n = u_bar.len();
    let bound_tol = |b: f64| 1e-9 * (1.0 + b.abs());
    let mut at_lower = vec![false; n];
    let mut at_upper = vec![false; n];
    let mut strong = vec![false; n];
    for i in 0..n {
        let ui = u_bar.values()[i];
        if bounds.is_lower_finite() && (ui - bounds.lower).abs() <= bound_tol(bounds.lower) {
            at_lower[i] = true;
        }
        if bounds.is_upper_finite() && (bounds.upper - ui).abs() <= bound_tol(bounds.upper) {
            at_upper[i] = true;
        }
        if gradient.values()[i].abs() > opts.tau_active {
            strong[i] = true;
        }
    }
    let n_active = (0..n).filter(|&i| at_lower[i] || at_upper[i]).count();
    let n_strongly_active = strong.iter().filter(|&&s| s).count();
    let vacuous = strong.iter().all(|&s| s);

    if vacuous {
        return Ok(CurvatureReport {
            min_quadratic_form: None,
            sampled_min: None,
            rayleigh_min: None,
            n_samples,
            n_active,
            n_strongly_active,
            vacuous,
            seed,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_min: Option<f64> = None;
    for _ in 0..n_samples {
        let mut v = ScalarField::zeros(disc.grid());
        for i in 0..n {
            let xi: f64 = rng.random_range(-1.0..1.0);
            v.values_mut()[i] = if strong[i] {
                0.0
            } else if at_lower[i] {
                xi.abs()
            } else if at_upper[i] {
                -xi.abs()
            } else {
                xi
            };
        }
        let norm = disc.control_norm(&v);
        if norm == 0.0 {
            continue;
        }
        let v = v.scaled(1.0 / norm);
        let quad = disc.control_inner(&rh.apply(&v), &v);
        sampled_min = Some(sampled_min.map_or(quad, |m: f64| m.min(quad)));
    }

    let subspace: Vec<bool> = (0..n)
        .map(|i| !at_lower[i] && !at_upper[i] && !strong[i])
        .collect();
    let dim = subspace.iter().filter(|&&s| s).count();
    let rayleigh_min = if dim == 0 {
        None
    } else {
        let mut start = vec![0.0; n];
        for (i, s) in start.iter_mut().enumerate() {
            if subspace[i] {
                *s = rng.random_range(-1.0..1.0);
            }
        }
        let project = |v: &mut Vec<f64>| {
            for (x, &keep) in v.iter_mut().zip(&subspace) {
                if !keep {
                    *x = 0.0;
                }
            }
        };
        let ritz = crate::eig::lanczos_smallest(
            start,
            |v| {
                let f = ScalarField::like(u_bar, v.to_vec());
                let mut h = rh.apply(&f).into_values();
                project(&mut h);
                h
            },
            |a, b| {
                let fa = ScalarField::like(u_bar, a.to_vec());
                let fb = ScalarField::like(u_bar, b.to_vec());
                disc.control_inner(&fa, &fb)
            },
            dim.min(60),
        )?;
        Some(ritz)
    };

    let min_quadratic_form = match (sampled_min, rayleigh_min) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    };

    Ok(CurvatureReport {
        min_quadratic_form,
        sampled_min,
        rayleigh_min,
        n_samples,
        n_active,
        n_strongly_active,
        vacuous,
        seed,
    })
}
