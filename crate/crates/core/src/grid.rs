//! Uniform rectangular grids, interior degree-of-freedom maps and nodal
//! scalar fields.
//!
//! Nodes are numbered row-major: node `(ix, iy)` has index
//! `iy * (nx + 1) + ix` with `ix` running fastest. The homogeneous
//! Dirichlet condition is imposed by elimination, so all assembled
//! operators act on the `(nx - 1) * (ny - 1)` interior nodes only;
//! boundary nodes never receive a degree of freedom.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle, the computational domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectDomain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RectDomain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let all_finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !all_finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidDomain {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn unit_square() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Bijection between interior grid nodes and contiguous dof indices.
/// Boundary nodes map to `None`.
#[derive(Clone, Debug)]
pub struct DofMap {
    nx: usize,
    ny: usize,
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<(usize, usize)>,
}

impl DofMap {
    fn build(nx: usize, ny: usize) -> Self {
        let mut node_to_dof = vec![None; (nx + 1) * (ny + 1)];
        let mut dof_to_node = Vec::with_capacity((nx - 1) * (ny - 1));
        for iy in 1..ny {
            for ix in 1..nx {
                node_to_dof[iy * (nx + 1) + ix] = Some(dof_to_node.len());
                dof_to_node.push((ix, iy));
            }
        }
        Self {
            nx,
            ny,
            node_to_dof,
            dof_to_node,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn is_boundary(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix == self.nx || iy == self.ny
    }

    /// Dof index of node `(ix, iy)`, `None` for boundary nodes.
    pub fn dof(&self, ix: usize, iy: usize) -> Option<usize> {
        self.node_to_dof[iy * (self.nx + 1) + ix]
    }

    /// Grid node of an interior dof.
    pub fn node(&self, dof: usize) -> (usize, usize) {
        self.dof_to_node[dof]
    }
}

/// Uniform tensor-product grid of Q1 elements over a rectangle.
#[derive(Clone, Debug)]
pub struct UniformGrid {
    domain: RectDomain,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    dofs: DofMap,
}

impl UniformGrid {
    /// Builds the grid; `nx`, `ny` are element counts per axis and must
    /// both be at least 2 so there is at least one interior node.
    pub fn new(domain: RectDomain, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::GridTooCoarse { nx, ny });
        }
        Ok(Self {
            domain,
            nx,
            ny,
            hx: domain.width() / nx as f64,
            hy: domain.height() / ny as f64,
            dofs: DofMap::build(nx, ny),
        })
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_interior(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.n_nodes()
    }

    /// Physical coordinates of node `(ix, iy)`.
    pub fn node_coords(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.domain.x_min + ix as f64 * self.hx,
            self.domain.y_min + iy as f64 * self.hy,
        )
    }

    /// Evaluates `f` at every grid node, row-major with `ix` fastest.
    pub fn eval_nodes(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_nodes());
        for iy in 0..=self.ny {
            for ix in 0..=self.nx {
                let (x, y) = self.node_coords(ix, iy);
                out.push(f(x, y));
            }
        }
        out
    }

    /// Samples `f` at interior nodes into a [`ScalarField`].
    pub fn interior_field(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(self.n_interior());
        for dof in 0..self.n_interior() {
            let (ix, iy) = self.dofs.node(dof);
            let (x, y) = self.node_coords(ix, iy);
            values.push(f(x, y));
        }
        ScalarField {
            nx: self.nx,
            ny: self.ny,
            values,
        }
    }

    /// Bilinear interpolation of full nodal values at a point of the
    /// closed domain.
    pub fn interp_nodal(&self, full: &[f64], x: f64, y: f64) -> f64 {
        debug_assert_eq!(full.len(), self.n_nodes());
        let fx = ((x - self.domain.x_min) / self.hx).clamp(0.0, self.nx as f64);
        let fy = ((y - self.domain.y_min) / self.hy).clamp(0.0, self.ny as f64);
        let ex = (fx.floor() as usize).min(self.nx - 1);
        let ey = (fy.floor() as usize).min(self.ny - 1);
        let s = fx - ex as f64;
        let t = fy - ey as f64;
        let at = |ix: usize, iy: usize| full[iy * (self.nx + 1) + ix];
        (1.0 - s) * (1.0 - t) * at(ex, ey)
            + s * (1.0 - t) * at(ex + 1, ey)
            + s * t * at(ex + 1, ey + 1)
            + (1.0 - s) * t * at(ex, ey + 1)
    }
}

/// Nodal coefficient vector on the interior dofs of a grid. Represents
/// states, controls, adjoints and linearization directions. The grid
/// shape is carried along so mismatched operations are caught early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &UniformGrid) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: vec![0.0; grid.n_interior()],
        }
    }

    pub fn constant(grid: &UniformGrid, value: f64) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: vec![value; grid.n_interior()],
        }
    }

    /// Wraps raw interior values; rejects wrong length and non-finite
    /// entries.
    pub fn from_values(grid: &UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_interior(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite field value {} at dof {bad}",
                values[bad]
            )));
        }
        Ok(Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values,
        })
    }

    pub fn from_fn(grid: &UniformGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        grid.interior_field(f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn matches(&self, grid: &UniformGrid) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny()
    }

    /// Extends to all grid nodes with zeros on the boundary (the
    /// Dirichlet extension used throughout assembly).
    pub fn to_full_nodal(&self, grid: &UniformGrid) -> Vec<f64> {
        debug_assert!(self.matches(grid));
        let mut full = vec![0.0; grid.n_nodes()];
        for (dof, &v) in self.values.iter().enumerate() {
            let (ix, iy) = grid.dof_map().node(dof);
            full[iy * (grid.nx() + 1) + ix] = v;
        }
        full
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(alpha, other);
        out
    }

    /// Nodal clamp to `[lo, hi]`; either bound may be infinite.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.clamp(lo, hi);
        }
        out
    }

    pub(crate) fn like(other: &Self, values: Vec<f64>) -> Self {
        debug_assert_eq!(other.len(), values.len());
        Self {
            nx: other.nx,
            ny: other.ny,
            values,
        }
    }
}
