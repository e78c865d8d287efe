//! JSON run configuration: schema, defaults and the translation into a
//! validated [`ProblemSpec`].
//!
//! Unknown keys are rejected everywhere; schema violations surface with
//! a JSON-pointer path, semantic violations with the offending field
//! and constraint.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use convopt_core::state::LinearSolver;
use convopt_core::{
    Bounds, DiffusionTensor, NonlinearitySpec, ProblemSpec, RectDomain, ScalarField, UniformGrid,
    VectorCoefficient,
};

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub command: CommandConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses a UTF-8 JSON document; parse errors carry the JSON
    /// pointer of the offending element.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = format!("/{}", e.path().to_string().replace('.', "/"));
            err(&pointer, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Semantic validation beyond the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem.validate()?;
        self.solver.validate()?;
        self.command.validate()?;
        Ok(())
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, ConfigError> {
        self.problem.build()
    }

    pub fn task_name(&self) -> &'static str {
        self.command.name()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "DomainConfig::unit_square")]
    pub domain: DomainConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub convection: ConvectionConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub stabilization: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl DomainConfig {
    fn unit_square() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    /// defaults to `nx`
    pub ny: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionConfig {
    #[default]
    Identity,
    Scaled {
        scale: f64,
    },
    Constant {
        a11: f64,
        a12: f64,
        a21: f64,
        a22: f64,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConvectionConfig {
    #[default]
    Zero,
    Constant {
        b: [f64; 2],
    },
    /// `b_i(x, y) = c[0] + c[1] x + c[2] y`
    Affine {
        b1: [f64; 3],
        b2: [f64; 3],
    },
    /// `scale * (y, 1 - x)`
    Rotation {
        scale: f64,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    #[default]
    Zero,
    Power {
        #[serde(default = "one")]
        a0: f64,
        r: f64,
    },
    Exponential {
        #[serde(default = "one")]
        a0: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub target: TargetConfig,
    pub nu: f64,
}

/// Tracking targets; sine modes are scaled to the domain so they vanish
/// on the boundary.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Sine {
        amplitude: f64,
        #[serde(default = "one_u")]
        kx: usize,
        #[serde(default = "one_u")]
        ky: usize,
    },
}

fn one_u() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// `null` means unbounded below
    pub alpha: Option<f64>,
    /// `null` means unbounded above
    pub beta: Option<f64>,
}

impl ProblemConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        if !(d.x_min < d.x_max) || !(d.y_min < d.y_max) {
            return Err(err("/problem/domain", "requires x_min < x_max and y_min < y_max"));
        }
        if self.grid.nx < 2 || self.grid.ny.unwrap_or(self.grid.nx) < 2 {
            return Err(err(
                "/problem/grid",
                "nx and ny must be at least 2 (no interior dof otherwise)",
            ));
        }
        match &self.diffusion {
            DiffusionConfig::Scaled { scale } if !(*scale > 0.0) => {
                return Err(err("/problem/diffusion/scale", "must be > 0"));
            }
            DiffusionConfig::Constant { a11, a12, a21, a22 } => {
                let tensor = DiffusionTensor::constant(*a11, *a12, *a21, *a22);
                if !(tensor.lambda() > 0.0) {
                    return Err(err(
                        "/problem/diffusion",
                        "constant tensor is not elliptic (lambda_min(sym a) <= 0)",
                    ));
                }
            }
            _ => {}
        }
        match &self.nonlinearity {
            NonlinearityConfig::Power { a0, r } => {
                if *a0 < 0.0 {
                    return Err(err("/problem/nonlinearity/a0", "must be >= 0"));
                }
                if !(*r >= 1.0) {
                    return Err(err("/problem/nonlinearity/r", "must be >= 1"));
                }
            }
            NonlinearityConfig::Exponential { a0 } if *a0 < 0.0 => {
                return Err(err("/problem/nonlinearity/a0", "must be >= 0"));
            }
            _ => {}
        }
        if !(self.objective.nu > 0.0) {
            return Err(err("/problem/objective/nu", "must satisfy nu > 0"));
        }
        let alpha = self.bounds.alpha.unwrap_or(f64::NEG_INFINITY);
        let beta = self.bounds.beta.unwrap_or(f64::INFINITY);
        if !(alpha < beta) {
            return Err(err("/problem/bounds", "requires alpha < beta"));
        }
        if self.stabilization < 0.0 {
            return Err(err("/problem/stabilization", "must be >= 0"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ProblemSpec, ConfigError> {
        self.validate()?;
        let d = &self.domain;
        let domain = RectDomain::new(d.x_min, d.x_max, d.y_min, d.y_max)
            .map_err(|e| err("/problem/domain", e.to_string()))?;
        let nx = self.grid.nx;
        let ny = self.grid.ny.unwrap_or(nx);
        let diffusion = match &self.diffusion {
            DiffusionConfig::Identity => DiffusionTensor::identity(),
            DiffusionConfig::Scaled { scale } => DiffusionTensor::scaled_identity(*scale),
            DiffusionConfig::Constant { a11, a12, a21, a22 } => {
                DiffusionTensor::constant(*a11, *a12, *a21, *a22)
            }
        };
        let convection = match &self.convection {
            ConvectionConfig::Zero => VectorCoefficient::zero(),
            ConvectionConfig::Constant { b } => VectorCoefficient::constant(b[0], b[1]),
            ConvectionConfig::Affine { b1, b2 } => VectorCoefficient::affine(*b1, *b2),
            ConvectionConfig::Rotation { scale } => {
                let s = *scale;
                VectorCoefficient::affine([0.0, 0.0, s], [s, -s, 0.0])
            }
        };
        let nonlinearity = match &self.nonlinearity {
            NonlinearityConfig::Zero => NonlinearitySpec::zero(),
            NonlinearityConfig::Power { a0, r } => NonlinearitySpec::power(*a0, *r)
                .map_err(|e| err("/problem/nonlinearity", e.to_string()))?,
            NonlinearityConfig::Exponential { a0 } => NonlinearitySpec::exponential(*a0),
        };
        let bounds = Bounds::new(
            self.bounds.alpha.unwrap_or(f64::NEG_INFINITY),
            self.bounds.beta.unwrap_or(f64::INFINITY),
        )
        .map_err(|e| err("/problem/bounds", e.to_string()))?;
        let target = self.target_fn(domain);
        let mut spec = ProblemSpec::tracking(
            domain,
            nx,
            ny,
            diffusion,
            convection,
            nonlinearity,
            target,
            self.objective.nu,
            bounds,
        )
        .map_err(|e| err("/problem", e.to_string()))?;
        spec.stabilization = self.stabilization;
        Ok(spec)
    }

    fn target_fn(&self, domain: RectDomain) -> impl Fn(f64, f64) -> f64 {
        let target = self.objective.target.clone();
        move |x, y| match &target {
            TargetConfig::Zero => 0.0,
            TargetConfig::Constant { value } => *value,
            TargetConfig::Sine { amplitude, kx, ky } => {
                let sx = (x - domain.x_min) / domain.width();
                let sy = (y - domain.y_min) / domain.height();
                amplitude
                    * (*kx as f64 * PI * sx).sin()
                    * (*ky as f64 * PI * sy).sin()
            }
        }
    }

    /// Samples the control description of a command on the grid of the
    /// built problem.
    pub fn sample_control(
        &self,
        grid: &UniformGrid,
        control: &ControlConfig,
    ) -> ScalarField {
        let domain = *grid.domain();
        match control {
            ControlConfig::Zero => ScalarField::zeros(grid),
            ControlConfig::Constant { value } => ScalarField::constant(grid, *value),
            ControlConfig::Sine { amplitude } => ScalarField::from_fn(grid, |x, y| {
                let sx = (x - domain.x_min) / domain.width();
                let sy = (y - domain.y_min) / domain.height();
                amplitude * (PI * sx).sin() * (PI * sy).sin()
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol_state")]
    pub tol_state: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
    #[serde(default)]
    pub linear_solver: LinearSolverConfig,
    #[serde(default = "default_tol_opt")]
    pub tol_opt: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
}

fn default_tol_state() -> f64 {
    1e-10
}
fn default_max_newton() -> usize {
    30
}
fn default_tol_opt() -> f64 {
    1e-9
}
fn default_max_outer() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_state: default_tol_state(),
            max_newton: default_max_newton(),
            linear_solver: LinearSolverConfig::default(),
            tol_opt: default_tol_opt(),
            max_outer: default_max_outer(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol_state > 0.0) {
            return Err(err("/solver/tol_state", "must be > 0"));
        }
        if !(self.tol_opt > 0.0) {
            return Err(err("/solver/tol_opt", "must be > 0"));
        }
        Ok(())
    }

    pub fn state_options(&self) -> convopt_core::StateOptions {
        convopt_core::StateOptions {
            tol_state: self.tol_state,
            max_newton: self.max_newton,
            linear: match &self.linear_solver {
                LinearSolverConfig::Direct => LinearSolver::Direct,
                LinearSolverConfig::GmresIlu { restart, max_iter } => LinearSolver::GmresIlu {
                    restart: *restart,
                    max_iter: *max_iter,
                },
            },
            ..convopt_core::StateOptions::default()
        }
    }

    pub fn opt_options(&self) -> convopt_core::control::OptOptions {
        let mut state = self.state_options();
        // optimizer-internal solves need headroom below tol_opt
        state.tol_state = state.tol_state.min(1e-12);
        convopt_core::control::OptOptions {
            max_outer: self.max_outer,
            tol_opt: self.tol_opt,
            state,
            ..convopt_core::control::OptOptions::default()
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LinearSolverConfig {
    #[default]
    Direct,
    GmresIlu {
        #[serde(default = "default_restart")]
        restart: usize,
        #[serde(default = "default_gmres_max")]
        max_iter: usize,
    },
}

fn default_restart() -> usize {
    50
}
fn default_gmres_max() -> usize {
    2000
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Sine {
        amplitude: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    SolveState {
        #[serde(default)]
        control: ControlConfig,
    },
    Optimize {
        #[serde(default)]
        optimizer: OptimizerConfig,
        #[serde(default)]
        initial: ControlConfig,
    },
    CheckGradient {
        #[serde(default = "default_directions")]
        directions: usize,
        #[serde(default)]
        control: ControlConfig,
    },
    CheckHessian {
        #[serde(default)]
        control: ControlConfig,
    },
    ComparisonSuite {
        #[serde(default = "default_pairs")]
        n_pairs: usize,
        #[serde(default = "default_comparison_tol")]
        tolerance: f64,
    },
    ConvergenceStudy {
        case: String,
        #[serde(default = "default_grids")]
        grids: Vec<usize>,
    },
    DiagnoseCoercivity {},
    GrowthCheck {
        #[serde(default = "default_probes")]
        n_probes: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_samples")]
        cone_samples: usize,
    },
}

fn default_directions() -> usize {
    3
}
fn default_pairs() -> usize {
    50
}
fn default_comparison_tol() -> f64 {
    1e-9
}
fn default_grids() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_probes() -> usize {
    200
}
fn default_radius() -> f64 {
    0.1
}
fn default_samples() -> usize {
    100
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerConfig {
    #[default]
    SemismoothNewton,
    ProjectedGradient,
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::SolveState { .. } => "solve-state",
            CommandConfig::Optimize { .. } => "optimize",
            CommandConfig::CheckGradient { .. } => "check-gradient",
            CommandConfig::CheckHessian { .. } => "check-hessian",
            CommandConfig::ComparisonSuite { .. } => "comparison-suite",
            CommandConfig::ConvergenceStudy { .. } => "convergence-study",
            CommandConfig::DiagnoseCoercivity {} => "diagnose-coercivity",
            CommandConfig::GrowthCheck { .. } => "growth-check",
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            CommandConfig::ConvergenceStudy { grids, case } => {
                if grids.len() < 2 || grids.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(err(
                        "/command/grids",
                        "needs a strictly refining sequence of at least two grids",
                    ));
                }
                convopt_core::mms::ManufacturedCase::by_name(case)
                    .map_err(|e| err("/command/case", e.to_string()))?;
                Ok(())
            }
            CommandConfig::GrowthCheck { radius, .. } if !(*radius > 0.0) => {
                Err(err("/command/radius", "must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<FieldFormat>,
}

fn default_out_dir() -> String {
    "out".to_string()
}

fn default_formats() -> Vec<FieldFormat> {
    vec![FieldFormat::Csv, FieldFormat::VtkLegacy, FieldFormat::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    Csv,
    VtkLegacy,
    Json,
}
