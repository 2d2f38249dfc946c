//! Uniform space-time grids on `(0,1)^2 x (0,T)`, field storage, boundary
//! traces and the discrete norms shared by the solvers and the optimizer.
//!
//! All spatial and temporal integrals use the composite trapezoid rule.
//! Boundary edges are named after the unit square sides:
//!
//! ```text
//!            Gamma4 (y = 1, Dirichlet)
//!          +--------------------------+
//!          |                          |
//!  Gamma1  |                          |  Gamma3
//!  (x = 0, |                          |  (x = 1,
//!   flux)  |                          |   Dirichlet)
//!          +--------------------------+
//!            Gamma2 (y = 0, flux)
//! ```

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Uniform discretization of the unit square and the interval `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nt: usize,
    t_final: f64,
}

impl Grid {
    /// `nx`, `ny` count nodes including both boundaries; `nt` counts time steps.
    pub fn new(nx: usize, ny: usize, nt: usize, t_final: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per direction, got {nx}x{ny}"
            )));
        }
        if nt == 0 {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("final time must be > 0, got {t_final}")));
        }
        Ok(Self { nx, ny, nt, t_final })
    }

    /// Grid from a mesh size `h` (both directions) and a time step `tau`.
    /// `1/h` and `t_final/tau` must be (close to) integers.
    pub fn from_steps(h: f64, tau: f64, t_final: f64) -> Result<Self> {
        let cells = (1.0 / h).round();
        let steps = (t_final / tau).round();
        if !(h > 0.0 && tau > 0.0)
            || (cells * h - 1.0).abs() > 1e-9
            || (steps * tau - t_final).abs() > 1e-9 * t_final.max(1.0)
        {
            return Err(Error::InvalidGrid(format!(
                "h = {h} and tau = {tau} must divide 1 and T = {t_final}"
            )));
        }
        Self::new(cells as usize + 1, cells as usize + 1, steps as usize, t_final)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn hx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }
    pub fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }
    pub fn tau(&self) -> f64 {
        self.t_final / self.nt as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.tau()
    }

    /// Number of time levels, `nt + 1`.
    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    /// Nodes per time level.
    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Trapezoid weight of time level `n`.
    pub fn time_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.nt {
            0.5 * self.tau()
        } else {
            self.tau()
        }
    }

    /// Trapezoid weight of node `s` along an edge holding `count` nodes.
    pub fn edge_weight(&self, edge: Edge, s: usize) -> f64 {
        let count = self.edge_len(edge);
        let h = self.edge_step(edge);
        if s == 0 || s + 1 == count {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid weight of node `(i, j)` on the unit square.
    pub fn area_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.hx() * self.hy()
    }

    pub fn edge_len(&self, edge: Edge) -> usize {
        match edge {
            Edge::Gamma1 | Edge::Gamma3 => self.ny,
            Edge::Gamma2 | Edge::Gamma4 => self.nx,
        }
    }

    fn edge_step(&self, edge: Edge) -> f64 {
        match edge {
            Edge::Gamma1 | Edge::Gamma3 => self.hy(),
            Edge::Gamma2 | Edge::Gamma4 => self.hx(),
        }
    }

    /// Node `(i, j)` of the `s`-th point along `edge`.
    pub fn edge_node(&self, edge: Edge, s: usize) -> (usize, usize) {
        match edge {
            Edge::Gamma1 => (0, s),
            Edge::Gamma2 => (s, 0),
            Edge::Gamma3 => (self.nx - 1, s),
            Edge::Gamma4 => (s, self.ny - 1),
        }
    }

    /// Coordinate along the edge (y for Gamma1/Gamma3, x for Gamma2/Gamma4).
    pub fn edge_coord(&self, edge: Edge, s: usize) -> f64 {
        s as f64 * self.edge_step(edge)
    }

    /// Whether `(i, j)` lies on the Dirichlet part Gamma3 u Gamma4.
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        i + 1 == self.nx || j + 1 == self.ny
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// One side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    /// `x = 0`, flux boundary.
    Gamma1,
    /// `y = 0`, flux boundary.
    Gamma2,
    /// `x = 1`, homogeneous Dirichlet.
    Gamma3,
    /// `y = 1`, homogeneous Dirichlet.
    Gamma4,
}

/// Space-time scalar field, stored level by level (`[n][j][i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.nodes() * grid.levels()] }
    }

    /// Samples `f(x, y, t)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for n in 0..grid.levels() {
            let t = grid.t(n);
            let level = field.level_mut(n);
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    level[grid.node(i, j)] = f(grid.x(i), grid.y(j), t);
                }
            }
        }
        field
    }

    pub fn from_levels(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() * grid.levels() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.nodes() * grid.levels(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, n: usize) -> f64 {
        self.values[n * self.grid.nodes() + self.grid.node(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, n: usize, v: f64) {
        let idx = n * self.grid.nodes() + self.grid.node(i, j);
        self.values[idx] = v;
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.nodes();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.grid.nodes();
        &mut self.values[n * m..(n + 1) * m]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn try_sub(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn try_add(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Reverses the order of the time levels.
    pub fn time_reversed(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        let last = self.grid.nt();
        for n in 0..self.grid.levels() {
            out.level_mut(last - n).copy_from_slice(self.level(n));
        }
        out
    }

    /// Values on the Dirichlet edges, largest magnitude.
    pub fn max_abs_dirichlet(&self) -> f64 {
        let g = self.grid;
        let mut m = 0.0f64;
        for n in 0..g.levels() {
            for s in 0..g.ny() {
                m = m.max(self.get(g.nx() - 1, s, n).abs());
            }
            for s in 0..g.nx() {
                m = m.max(self.get(s, g.ny() - 1, n).abs());
            }
        }
        m
    }
}

/// Values of a field on one edge at every time level (`[n][s]`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid,
    edge: Edge,
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: Grid, edge: Edge) -> Self {
        Self { grid, edge, values: vec![0.0; grid.edge_len(edge) * grid.levels()] }
    }

    /// Samples `f(s, t)` where `s` is the coordinate along the edge.
    pub fn from_fn(grid: Grid, edge: Edge, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut tr = Self::zeros(grid, edge);
        let len = grid.edge_len(edge);
        for n in 0..grid.levels() {
            let t = grid.t(n);
            for s in 0..len {
                tr.values[n * len + s] = f(grid.edge_coord(edge, s), t);
            }
        }
        tr
    }

    pub fn from_values(grid: Grid, edge: Edge, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.edge_len(edge) * grid.levels() {
            return Err(Error::GridMismatch(format!(
                "trace on {edge:?} needs {} values, got {}",
                grid.edge_len(edge) * grid.levels(),
                values.len()
            )));
        }
        Ok(Self { grid, edge, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn edge(&self) -> Edge {
        self.edge
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Nodes along the edge.
    pub fn len(&self) -> usize {
        self.grid.edge_len(self.edge)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize, n: usize) -> f64 {
        self.values[n * self.len() + s]
    }

    pub fn set(&mut self, s: usize, n: usize, v: f64) {
        let len = self.len();
        self.values[n * len + s] = v;
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let len = self.len();
        &self.values[n * len..(n + 1) * len]
    }

    fn check_compatible(&self, other: &BoundaryTrace) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.edge != other.edge {
            return Err(Error::GridMismatch(format!(
                "traces live on {:?} and {:?}",
                self.edge, other.edge
            )));
        }
        Ok(())
    }

    /// Space-time trapezoid inner product over `edge x (0, T)`.
    pub fn dot(&self, other: &BoundaryTrace) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &BoundaryTrace) -> f64 {
        let len = self.len();
        let mut total = 0.0;
        for n in 0..self.grid.levels() {
            let wt = self.grid.time_weight(n);
            let mut level = 0.0;
            for s in 0..len {
                level += self.grid.edge_weight(self.edge, s)
                    * self.values[n * len + s]
                    * other.values[n * len + s];
            }
            total += wt * level;
        }
        total
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot_unchecked(self)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid, edge: self.edge, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn try_add(&self, other: &BoundaryTrace) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &BoundaryTrace) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + c * other`.
    pub fn try_axpy(&self, c: f64, other: &BoundaryTrace) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + c * b))
    }

    fn zip_with(&self, other: &BoundaryTrace, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            edge: self.edge,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Restricts a trace defined on a grid refined by `factor` in space and
    /// time onto `coarse`, sampling the coinciding nodes.
    pub fn restrict_to(&self, coarse: Grid, factor: usize) -> Result<Self> {
        let g = self.grid;
        if (coarse.nx() - 1) * factor != g.nx() - 1
            || (coarse.ny() - 1) * factor != g.ny() - 1
            || coarse.nt() * factor != g.nt()
            || (coarse.t_final() - g.t_final()).abs() > 1e-12
        {
            return Err(Error::GridMismatch(format!(
                "{g:?} is not a {factor}x refinement of {coarse:?}"
            )));
        }
        let mut out = Self::zeros(coarse, self.edge);
        for n in 0..coarse.levels() {
            for s in 0..out.len() {
                out.set(s, n, self.get(s * factor, n * factor));
            }
        }
        Ok(out)
    }
}

impl Add for &BoundaryTrace {
    type Output = BoundaryTrace;
    fn add(self, rhs: &BoundaryTrace) -> BoundaryTrace {
        self.try_add(rhs).expect("trace grids differ")
    }
}

impl Sub for &BoundaryTrace {
    type Output = BoundaryTrace;
    fn sub(self, rhs: &BoundaryTrace) -> BoundaryTrace {
        self.try_sub(rhs).expect("trace grids differ")
    }
}

impl Mul<&BoundaryTrace> for f64 {
    type Output = BoundaryTrace;
    fn mul(self, rhs: &BoundaryTrace) -> BoundaryTrace {
        rhs.scaled(self)
    }
}

/// Box constraints of the admissible flux set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBounds {
    pub f1_lo: f64,
    pub f1_hi: f64,
    pub f2_lo: f64,
    pub f2_hi: f64,
}

/// The inverse unknown: heat fluxes on Gamma1 and Gamma2.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    pub f1: BoundaryTrace,
    pub f2: BoundaryTrace,
    pub bounds: Option<FluxBounds>,
}

impl BoundaryFlux {
    pub fn new(f1: BoundaryTrace, f2: BoundaryTrace) -> Result<Self> {
        if f1.edge() != Edge::Gamma1 || f2.edge() != Edge::Gamma2 {
            return Err(Error::GridMismatch("fluxes must live on Gamma1 and Gamma2".into()));
        }
        f1.grid().check_same(f2.grid())?;
        Ok(Self { f1, f2, bounds: None })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            f1: BoundaryTrace::zeros(grid, Edge::Gamma1),
            f2: BoundaryTrace::zeros(grid, Edge::Gamma2),
            bounds: None,
        }
    }

    /// Attaches admissible bounds; every sample must lie strictly inside.
    pub fn with_bounds(mut self, bounds: FluxBounds) -> Result<Self> {
        let inside = |tr: &BoundaryTrace, lo: f64, hi: f64| {
            tr.values().iter().all(|&v| lo < v && v < hi)
        };
        if !inside(&self.f1, bounds.f1_lo, bounds.f1_hi) {
            return Err(Error::Inadmissible("f1 leaves (F1_lo, F1_hi)".into()));
        }
        if !inside(&self.f2, bounds.f2_lo, bounds.f2_hi) {
            return Err(Error::Inadmissible("f2 leaves (F2_lo, F2_hi)".into()));
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        self.f1.grid()
    }

    /// Clamps every sample into the closed bounds, if any are attached.
    pub fn project(&mut self) {
        if let Some(b) = self.bounds {
            for v in self.f1.values_mut() {
                *v = v.clamp(b.f1_lo, b.f1_hi);
            }
            for v in self.f2.values_mut() {
                *v = v.clamp(b.f2_lo, b.f2_hi);
            }
        }
    }
}

/// `sqrt` of the space-time trapezoid integral of `tr^2`.
pub fn l2_norm_boundary(tr: &BoundaryTrace) -> f64 {
    tr.norm_sq().sqrt()
}

/// Squared gradient magnitude at every node of one level: central
/// differences inside, one-sided differences on the boundary rows.
pub fn nodal_grad_sq(grid: &Grid, level: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut out = vec![0.0; grid.nodes()];
    for j in 0..ny {
        for i in 0..nx {
            let ux = if i == 0 {
                (level[grid.node(1, j)] - level[grid.node(0, j)]) / hx
            } else if i + 1 == nx {
                (level[grid.node(i, j)] - level[grid.node(i - 1, j)]) / hx
            } else {
                (level[grid.node(i + 1, j)] - level[grid.node(i - 1, j)]) / (2.0 * hx)
            };
            let uy = if j == 0 {
                (level[grid.node(i, 1)] - level[grid.node(i, 0)]) / hy
            } else if j + 1 == ny {
                (level[grid.node(i, j)] - level[grid.node(i, j - 1)]) / hy
            } else {
                (level[grid.node(i, j + 1)] - level[grid.node(i, j - 1)]) / (2.0 * hy)
            };
            out[grid.node(i, j)] = ux * ux + uy * uy;
        }
    }
    out
}

/// Norm in `L2(0,T; H^1(Omega))`: time trapezoid of `||grad u||^2 + ||u||^2`.
pub fn l2h1_spacetime_norm(fl: &Field) -> f64 {
    let g = fl.grid();
    let mut total = 0.0;
    for n in 0..g.levels() {
        let level = fl.level(n);
        let grad_sq = nodal_grad_sq(g, level);
        let mut s = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.node(i, j);
                s += g.area_weight(i, j) * (grad_sq[k] + level[k] * level[k]);
            }
        }
        total += g.time_weight(n) * s;
    }
    total.sqrt()
}

/// Copies a field's values on `edge` at every time level.
pub fn restrict_to_edge(fl: &Field, edge: Edge) -> BoundaryTrace {
    let g = *fl.grid();
    let mut tr = BoundaryTrace::zeros(g, edge);
    for n in 0..g.levels() {
        for s in 0..g.edge_len(edge) {
            let (i, j) = g.edge_node(edge, s);
            tr.set(s, n, fl.get(i, j, n));
        }
    }
    tr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let g = Grid::from_steps(0.05, 0.001, 1.0).unwrap();
        assert_eq!((g.nx(), g.ny(), g.nt()), (21, 21, 1000));
        assert!((g.hx() - 0.05).abs() < 1e-15);
        assert!((g.tau() - 0.001).abs() < 1e-15);
        assert!(Grid::from_steps(0.03, 0.001, 1.0).is_err());
        assert!(Grid::new(2, 5, 10, 1.0).is_err());
        assert!(Grid::new(5, 5, 10, -1.0).is_err());
    }

    #[test]
    fn zero_and_unit_traces() {
        let g = Grid::new(11, 11, 10, 1.0).unwrap();
        assert_eq!(l2_norm_boundary(&BoundaryTrace::zeros(g, Edge::Gamma1)), 0.0);
        let one = BoundaryTrace::from_fn(g, Edge::Gamma1, |_, _| 1.0);
        assert!((l2_norm_boundary(&one) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_trace_converges_to_analytic_norm() {
        // int_0^1 y^2 dy = 1/3; trapezoid error is h^2/6, so it halves by 4
        // under each refinement.
        let exact = (1.0f64 / 3.0).sqrt();
        let mut prev = f64::INFINITY;
        for cells in [5, 10, 20, 40] {
            let g = Grid::new(cells + 1, cells + 1, 4, 1.0).unwrap();
            let tr = BoundaryTrace::from_fn(g, Edge::Gamma1, |y, _| y);
            let err = (l2_norm_boundary(&tr) - exact).abs();
            assert!(err < prev);
            let h = 1.0 / cells as f64;
            let sq_err = (tr.norm_sq() - 1.0 / 3.0).abs();
            assert!((sq_err - h * h / 6.0).abs() < 1e-12);
            prev = err;
        }
    }

    #[test]
    fn h1_norm_of_linear_field() {
        // integrand |grad x|^2 + x^2 integrates to 4/3 per unit time.
        let mut prev = f64::INFINITY;
        for cells in [4, 8, 16, 32] {
            let g = Grid::new(cells + 1, cells + 1, 8, 2.0).unwrap();
            let fl = Field::from_fn(g, |x, _, _| x);
            let err = (l2h1_spacetime_norm(&fl) - (4.0f64 / 3.0 * 2.0).sqrt()).abs();
            assert!(err < prev, "error did not decrease: {err} >= {prev}");
            prev = err;
        }
        assert!(prev < 1e-3);
        let g = Grid::new(5, 5, 3, 1.0).unwrap();
        assert_eq!(l2h1_spacetime_norm(&Field::zeros(g)), 0.0);
    }

    #[test]
    fn restriction_samples_edges() {
        let g = Grid::new(6, 5, 3, 1.0).unwrap();
        let fl = Field::from_fn(g, |x, y, _| (1.0 - x) * (1.0 - y));
        let tr = restrict_to_edge(&fl, Edge::Gamma1);
        for n in 0..g.levels() {
            for j in 0..g.ny() {
                assert!((tr.get(j, n) - (1.0 - g.y(j))).abs() < 1e-15);
            }
        }
        let c = Field::from_fn(g, |_, _, _| 2.5);
        assert!(restrict_to_edge(&c, Edge::Gamma2).values().iter().all(|&v| v == 2.5));
        let tr3 = restrict_to_edge(&fl, Edge::Gamma3);
        assert!(tr3.values().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn mismatched_traces_are_rejected() {
        let g = Grid::new(5, 5, 3, 1.0).unwrap();
        let h = Grid::new(6, 5, 3, 1.0).unwrap();
        let a = BoundaryTrace::zeros(g, Edge::Gamma1);
        assert!(a.dot(&BoundaryTrace::zeros(h, Edge::Gamma1)).is_err());
        assert!(a.dot(&BoundaryTrace::zeros(g, Edge::Gamma2)).is_err());
    }

    #[test]
    fn admissible_bounds_are_strict() {
        let g = Grid::new(5, 5, 3, 1.0).unwrap();
        let f = BoundaryFlux::zeros(g);
        let b = FluxBounds { f1_lo: -1.0, f1_hi: 1.0, f2_lo: 0.0, f2_hi: 1.0 };
        assert!(f.clone().with_bounds(b).is_err());
        let ok = FluxBounds { f2_lo: -0.5, ..b };
        let mut f = f.with_bounds(ok).unwrap();
        f.f1.values_mut()[0] = 3.0;
        f.project();
        assert_eq!(f.f1.values()[0], 1.0);
    }

    #[test]
    fn restriction_from_refined_grid() {
        let fine = Grid::new(9, 9, 8, 1.0).unwrap();
        let coarse = Grid::new(5, 5, 4, 1.0).unwrap();
        let tr = BoundaryTrace::from_fn(fine, Edge::Gamma2, |x, t| x + 10.0 * t);
        let r = tr.restrict_to(coarse, 2).unwrap();
        assert_eq!(r, BoundaryTrace::from_fn(coarse, Edge::Gamma2, |x, t| x + 10.0 * t));
        assert!(tr.restrict_to(Grid::new(4, 5, 4, 1.0).unwrap(), 2).is_err());
    }
}
