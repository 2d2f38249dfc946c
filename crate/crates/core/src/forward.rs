//! Implicit finite-difference solver for the linearized fractional problem
//! and the Picard iteration for the nonlinear forward and backward problems.
//!
//! Space is discretized in conservative flux form on the node-centred dual
//! mesh: every unknown node owns a (possibly half or quarter) control volume,
//! face diffusivities are harmonic means of the nodal coefficient, and the
//! flux conditions `-k du/dn = f` on Gamma1/Gamma2 enter as boundary face
//! fluxes of the half cells. Multiplying every row by its control volume
//! makes the level matrix symmetric positive definite:
//!
//! ```text
//! (c0 M + K^n) u^n = M (F^n - memory^n) - L1 f1^n - L2 f2^n
//! ```
//!
//! where `c0 = tau^{-beta} / Gamma(2-beta)`, `M` holds the control volumes,
//! `K^n` the face conductances and `L1`, `L2` the boundary face lengths.
//! Nodes on Gamma3 u Gamma4 are eliminated (`u = 0`).

use std::time::Instant;

use crate::banded::BandedSpd;
use crate::error::{Error, Result};
use crate::frac::L1Weights;
use crate::materials::{k_field, PlasticityModel};
use crate::mesh::{l2h1_spacetime_norm, BoundaryFlux, BoundaryTrace, Edge, Field, Grid};

/// Which end of `[0, T]` carries the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    /// Left Caputo derivative, data at `t = 0`.
    Forward,
    /// Right Caputo derivative, data at `t = T`.
    Backward,
}

impl TimeDirection {
    /// Physical level visited at step `p` of the march.
    fn level(self, p: usize, nt: usize) -> usize {
        match self {
            Self::Forward => p,
            Self::Backward => nt - p,
        }
    }
}

/// Linear problem with a prescribed space-time coefficient.
#[derive(Debug, Clone, Copy)]
pub struct LinearProblem<'a> {
    pub grid: Grid,
    pub beta: f64,
    /// Nodal coefficient at every time level.
    pub kappa: &'a Field,
    pub source: Option<&'a Field>,
    pub f1: Option<&'a BoundaryTrace>,
    pub f2: Option<&'a BoundaryTrace>,
    /// Values at `t = 0` (forward) or `t = T` (backward), one per node.
    pub initial: Option<&'a [f64]>,
    pub direction: TimeDirection,
}

/// Face conductances of one time level.
struct Stencil {
    /// `east[node(i,j)]`: conductance of the face between `(i,j)` and `(i+1,j)`.
    east: Vec<f64>,
    /// `north[node(i,j)]`: conductance of the face between `(i,j)` and `(i,j+1)`.
    north: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl Stencil {
    fn new(grid: &Grid, kappa: &[f64]) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut east = vec![0.0; grid.nodes()];
        let mut north = vec![0.0; grid.nodes()];
        for j in 0..ny - 1 {
            let wy = if j == 0 { 0.5 } else { 1.0 };
            for i in 0..nx - 1 {
                let p = grid.node(i, j);
                east[p] = harmonic(kappa[p], kappa[grid.node(i + 1, j)]) * wy * hy / hx;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let wx = if i == 0 { 0.5 } else { 1.0 };
                let p = grid.node(i, j);
                north[p] = harmonic(kappa[p], kappa[grid.node(i, j + 1)]) * wx * hx / hy;
            }
        }
        Self { east, north }
    }
}

/// Index map between grid nodes and unknowns (nodes off Gamma3 u Gamma4).
struct Unknowns {
    mx: usize,
    my: usize,
}

impl Unknowns {
    fn new(grid: &Grid) -> Self {
        Self { mx: grid.nx() - 1, my: grid.ny() - 1 }
    }
    fn count(&self) -> usize {
        self.mx * self.my
    }
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }
}

fn check_coefficient(grid: &Grid, kappa: &[f64], level: usize) -> Result<()> {
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let v = kappa[grid.node(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveCoefficient { i, j, level, value: v });
            }
        }
    }
    Ok(())
}

/// Applies `K` (the stiffness part) to one level, rows scaled by control volumes.
fn apply_stiffness(grid: &Grid, st: &Stencil, u: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let p = grid.node(i, j);
            let e = st.east[p] * (u[p] - u[grid.node(i + 1, j)]);
            let n = st.north[p] * (u[p] - u[grid.node(i, j + 1)]);
            out[p] += e + n;
            if i + 1 < nx - 1 {
                out[grid.node(i + 1, j)] -= e;
            }
            if j + 1 < ny - 1 {
                out[grid.node(i, j + 1)] -= n;
            }
        }
    }
}

fn assemble(grid: &Grid, unk: &Unknowns, st: &Stencil, c0: f64) -> BandedSpd {
    let mut a = BandedSpd::zeros(unk.count(), unk.mx);
    for j in 0..unk.my {
        for i in 0..unk.mx {
            let r = unk.idx(i, j);
            let p = grid.node(i, j);
            a.add(r, r, c0 * grid.area_weight(i, j) + st.east[p] + st.north[p]);
            if i > 0 {
                let w = st.east[grid.node(i - 1, j)];
                a.add(r, r, w);
                a.add(r, unk.idx(i - 1, j), -w);
            }
            if j > 0 {
                let s = st.north[grid.node(i, j - 1)];
                a.add(r, r, s);
                a.add(r, unk.idx(i, j - 1), -s);
            }
        }
    }
    a
}

fn check_traces(grid: &Grid, f1: Option<&BoundaryTrace>, f2: Option<&BoundaryTrace>) -> Result<()> {
    for (tr, edge) in [(f1, Edge::Gamma1), (f2, Edge::Gamma2)] {
        if let Some(tr) = tr {
            grid.check_same(tr.grid())?;
            if tr.edge() != edge {
                return Err(Error::GridMismatch(format!("expected a trace on {edge:?}, got {:?}", tr.edge())));
            }
        }
    }
    Ok(())
}

/// Solves the linear problem by marching through the time levels.
pub fn solve_linear(spec: &LinearProblem<'_>) -> Result<Field> {
    let grid = spec.grid;
    grid.check_same(spec.kappa.grid())?;
    if let Some(f) = spec.source {
        grid.check_same(f.grid())?;
    }
    check_traces(&grid, spec.f1, spec.f2)?;
    if let Some(g) = spec.initial {
        if g.len() != grid.nodes() {
            return Err(Error::GridMismatch(format!("initial data has {} values, expected {}", g.len(), grid.nodes())));
        }
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if grid.is_dirichlet(i, j) && g[grid.node(i, j)].abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "initial data must vanish on Gamma3/Gamma4, got {} at ({i}, {j})",
                        g[grid.node(i, j)]
                    )));
                }
            }
        }
    }

    let nt = grid.nt();
    let weights = L1Weights::new(spec.beta, grid.tau(), nt)?;
    let c0 = weights.memory_coeff(0);
    let unk = Unknowns::new(&grid);
    let nodes = grid.nodes();

    // Solution in march order; converted to physical levels at the end.
    let mut march: Vec<Vec<f64>> = Vec::with_capacity(nt + 1);
    march.push(spec.initial.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; nodes]));

    let mut memory = vec![0.0; nodes];
    let mut rhs = vec![0.0; unk.count()];
    for p in 1..=nt {
        let level = spec.direction.level(p, nt);
        let kappa = spec.kappa.level(level);
        check_coefficient(&grid, kappa, level)?;
        let st = Stencil::new(&grid, kappa);

        // memory = sum_{m<p} c_{p-m} u^m, the history moved to the right-hand side.
        memory.iter_mut().for_each(|v| *v = 0.0);
        let c_init = weights.initial_coeff(p);
        for (v, u0) in memory.iter_mut().zip(&march[0]) {
            *v = c_init * u0;
        }
        for (m, um) in march.iter().enumerate().skip(1) {
            let c = weights.memory_coeff(p - m);
            for (v, u) in memory.iter_mut().zip(um) {
                *v += c * u;
            }
        }

        for j in 0..unk.my {
            for i in 0..unk.mx {
                let node = grid.node(i, j);
                let f = spec.source.map_or(0.0, |s| s.level(level)[node]);
                rhs[unk.idx(i, j)] = grid.area_weight(i, j) * (f - memory[node]);
            }
        }
        if let Some(f1) = spec.f1 {
            for j in 0..unk.my {
                rhs[unk.idx(0, j)] -= grid.edge_weight(Edge::Gamma1, j) * f1.get(j, level);
            }
        }
        if let Some(f2) = spec.f2 {
            for i in 0..unk.mx {
                rhs[unk.idx(i, 0)] -= grid.edge_weight(Edge::Gamma2, i) * f2.get(i, level);
            }
        }

        let chol = assemble(&grid, &unk, &st, c0).factor().map_err(|e| Error::LinearSolve {
            level,
            reason: format!("matrix not positive definite at pivot {} ({:e})", e.pivot, e.value),
        })?;
        chol.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve { level, reason: "non-finite solution".into() });
        }

        let mut u = vec![0.0; nodes];
        for j in 0..unk.my {
            for i in 0..unk.mx {
                u[grid.node(i, j)] = rhs[unk.idx(i, j)];
            }
        }
        march.push(u);
    }

    let mut out = Field::zeros(grid);
    for (p, u) in march.into_iter().enumerate() {
        out.level_mut(spec.direction.level(p, nt)).copy_from_slice(&u);
    }
    // Exact homogeneous Dirichlet values, including any initial data there.
    for n in 0..grid.levels() {
        let level = out.level_mut(n);
        for j in 0..grid.ny() {
            level[grid.node(grid.nx() - 1, j)] = 0.0;
        }
        for i in 0..grid.nx() {
            level[grid.node(i, grid.ny() - 1)] = 0.0;
        }
    }
    Ok(out)
}

/// Discrete left operator `M D_L u^n + K^n u^n` at levels `1..=nt`
/// (level 0 of the result is zero). Used to state discrete duality.
pub fn apply_left_operator(beta: f64, kappa: &Field, u: &Field) -> Result<Field> {
    let grid = *u.grid();
    grid.check_same(kappa.grid())?;
    let w = L1Weights::new(beta, grid.tau(), grid.nt())?;
    let mut out = Field::zeros(grid);
    for n in 1..grid.levels() {
        let st = Stencil::new(&grid, kappa.level(n));
        let mut row = vec![0.0; grid.nodes()];
        apply_stiffness(&grid, &st, u.level(n), &mut row);
        for m in 0..=n {
            let c = if m == 0 { w.initial_coeff(n) } else { w.memory_coeff(n - m) };
            let um = u.level(m);
            for j in 0..grid.ny() - 1 {
                for i in 0..grid.nx() - 1 {
                    let p = grid.node(i, j);
                    row[p] += c * grid.area_weight(i, j) * um[p];
                }
            }
        }
        mask_dirichlet(&grid, &mut row);
        out.level_mut(n).copy_from_slice(&row);
    }
    Ok(out)
}

/// Discrete right operator paired with [`apply_left_operator`]:
/// `M D_R v^p + K^{p+1} v^p` at levels `0..nt` (level `nt` of the result is
/// zero), with the L1 right derivative taken against `v^nt`.
pub fn apply_right_operator(beta: f64, kappa: &Field, v: &Field) -> Result<Field> {
    let grid = *v.grid();
    grid.check_same(kappa.grid())?;
    let nt = grid.nt();
    let w = L1Weights::new(beta, grid.tau(), nt)?;
    let mut out = Field::zeros(grid);
    for p in 0..nt {
        let st = Stencil::new(&grid, kappa.level(p + 1));
        let mut row = vec![0.0; grid.nodes()];
        apply_stiffness(&grid, &st, v.level(p), &mut row);
        // Reversed march: step q = nt - p, history v^{nt}, ..., v^{p}.
        let q = nt - p;
        for m in p..=nt {
            let c = if m == nt { w.initial_coeff(q) } else { w.memory_coeff(m - p) };
            let vm = v.level(m);
            for j in 0..grid.ny() - 1 {
                for i in 0..grid.nx() - 1 {
                    let k = grid.node(i, j);
                    row[k] += c * grid.area_weight(i, j) * vm[k];
                }
            }
        }
        mask_dirichlet(&grid, &mut row);
        out.level_mut(p).copy_from_slice(&row);
    }
    Ok(out)
}

fn mask_dirichlet(grid: &Grid, row: &mut [f64]) {
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if grid.is_dirichlet(i, j) {
                row[grid.node(i, j)] = 0.0;
            }
        }
    }
}

/// Stopping rule of the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// Stop once `||u^(n+1) - u^(n)||_{L2(0,T;H1)} <= theta_bar`.
    pub theta_bar: Option<f64>,
    /// Upper bound on linear solves when iterating to `theta_bar`.
    pub max_outer: usize,
    /// Run exactly this many iterations and return `u^(fixed_iters)`.
    pub fixed_iters: Option<usize>,
}

impl PicardConfig {
    pub fn tolerance(theta_bar: f64) -> Self {
        Self { theta_bar: Some(theta_bar), max_outer: 200, fixed_iters: None }
    }

    pub fn fixed(iters: usize) -> Self {
        Self { theta_bar: None, max_outer: iters, fixed_iters: Some(iters) }
    }

    fn validate(&self) -> Result<()> {
        match (self.theta_bar, self.fixed_iters) {
            (_, Some(0)) => Err(Error::InvalidArgument("fixed_iters must be >= 1".into())),
            (_, Some(_)) => Ok(()),
            (Some(t), None) if t > 0.0 && self.max_outer >= 1 => Ok(()),
            _ => Err(Error::InvalidArgument("Picard needs theta_bar > 0 or fixed_iters".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Index of the returned iterate `u^(eta_star)`.
    pub eta_star: usize,
    /// `||u^(n) - u^(n-1)||_{L2(0,T;H1)}` for every linear solve `n = 1, 2, ...`.
    pub residual_history: Vec<f64>,
    pub cpu_seconds: f64,
}

/// Nonlinear problem `D^beta u - div(k(|grad u|^2) grad u) = F` with flux data on
/// Gamma1/Gamma2, `u = 0` on Gamma3/Gamma4 and data `g` at the start of the march.
#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    pub grid: Grid,
    pub beta: f64,
    pub model: PlasticityModel,
    pub source: Option<Field>,
    pub flux: BoundaryFlux,
    pub initial: Option<Vec<f64>>,
    pub direction: TimeDirection,
}

/// Result of a nonlinear solve.
#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub u: Field,
    /// Coefficient `k(|grad u^(eta_star - 1)|^2)` that produced `u`; `u` solves
    /// the linear problem with this coefficient exactly.
    pub frozen_kappa: Field,
    pub report: SolveReport,
}

fn coefficient_field(model: &PlasticityModel, u: &Field) -> Result<Field> {
    let grid = *u.grid();
    let mut kappa = Field::zeros(grid);
    for n in 0..grid.levels() {
        let k = k_field(model, u, n)?;
        kappa.level_mut(n).copy_from_slice(&k);
    }
    Ok(kappa)
}

/// Picard iteration: `u^(0) = 0`, then `u^(n)` solves the linear problem with
/// the coefficient frozen at `u^(n-1)`.
pub fn solve_nonlinear(problem: &NonlinearProblem, cfg: &PicardConfig) -> Result<NonlinearSolution> {
    solve_nonlinear_with_flux(problem, &problem.flux, cfg)
}

/// As [`solve_nonlinear`] with the flux of `problem` replaced by `flux`.
pub fn solve_nonlinear_with_flux(
    problem: &NonlinearProblem,
    flux: &BoundaryFlux,
    cfg: &PicardConfig,
) -> Result<NonlinearSolution> {
    cfg.validate()?;
    problem.model.validate()?;
    let start = Instant::now();
    let grid = problem.grid;
    grid.check_same(flux.grid())?;

    let solve = |kappa: &Field| {
        solve_linear(&LinearProblem {
            grid,
            beta: problem.beta,
            kappa,
            source: problem.source.as_ref(),
            f1: Some(&flux.f1),
            f2: Some(&flux.f2),
            initial: problem.initial.as_deref(),
            direction: problem.direction,
        })
    };

    let cap = cfg.fixed_iters.unwrap_or(cfg.max_outer);
    let mut kappa = coefficient_field(&problem.model, &Field::zeros(grid))?;
    let mut current = solve(&kappa)?;
    let mut history = vec![l2h1_spacetime_norm(&current)];
    let mut eta = 1;
    let finish = |u: Field, kappa: Field, eta: usize, history: Vec<f64>| NonlinearSolution {
        u,
        frozen_kappa: kappa,
        report: SolveReport { eta_star: eta, residual_history: history, cpu_seconds: start.elapsed().as_secs_f64() },
    };

    if problem.model.is_constant() {
        // k does not see u, so u^(2) = u^(1).
        history.push(0.0);
        return Ok(finish(current, kappa, 1, history));
    }
    if let (Some(theta), None) = (cfg.theta_bar, cfg.fixed_iters) {
        if history[0] <= theta {
            return Ok(finish(current, kappa, 1, history));
        }
    }

    let mut rising = 0;
    loop {
        if cfg.fixed_iters.is_some_and(|k| eta >= k) {
            return Ok(finish(current, kappa, eta, history));
        }
        if eta >= cap {
            return Err(Error::PicardNotConverged {
                theta_bar: cfg.theta_bar.unwrap_or(0.0),
                iterations: eta,
                residual_history: history,
            });
        }
        let next_kappa = coefficient_field(&problem.model, &current)?;
        let next = solve(&next_kappa)?;
        let r = l2h1_spacetime_norm(&next.try_sub(&current)?);
        let prev = *history.last().unwrap();
        history.push(r);

        if r == 0.0 {
            return Ok(finish(current, kappa, eta, history));
        }
        if let (Some(theta), None) = (cfg.theta_bar, cfg.fixed_iters) {
            if r <= theta {
                return Ok(finish(current, kappa, eta, history));
            }
        }
        // Fluctuations at round-off level are not divergence.
        let floor = 64.0 * f64::EPSILON * history[0];
        rising = if r > prev && r > floor { rising + 1 } else { 0 };
        if rising >= 3 {
            return Err(Error::PicardDiverging { residual_history: history });
        }
        current = next;
        kappa = next_kappa;
        eta += 1;
    }
}

/// Sensitivity `u0(s1, s2)`: the linear problem with the frozen coefficient,
/// zero source, zero initial data and fluxes `(s1, s2)`.
pub fn solve_sensitivity(
    grid: Grid,
    beta: f64,
    s1: Option<&BoundaryTrace>,
    s2: Option<&BoundaryTrace>,
    frozen_kappa: &Field,
) -> Result<Field> {
    solve_linear(&LinearProblem {
        grid,
        beta,
        kappa: frozen_kappa,
        source: None,
        f1: s1,
        f2: s2,
        initial: None,
        direction: TimeDirection::Forward,
    })
}

/// Adjoint state for the boundary misfit `(residual1, residual2)`.
///
/// Solves the backward problem with flux data `2 r_i` on Gamma_i, zero
/// source and zero final value, using the transpose of the forward time
/// stepping: the multiplier of forward level `n` is marched with the
/// coefficient of level `n`, so it sits one reversed-L1 step ahead of the
/// zero terminal value. Time-quadrature weights are folded in so that the
/// `L2(Gamma_i^T)` gradient of `1/2 sum_i ||r_i||^2` is exactly half the
/// returned field restricted to Gamma_i. Level 0 is zero (no equation there).
pub fn solve_adjoint(
    residual1: &BoundaryTrace,
    residual2: &BoundaryTrace,
    frozen_kappa: &Field,
    grid: Grid,
    beta: f64,
) -> Result<Field> {
    check_traces(&grid, Some(residual1), Some(residual2))?;
    grid.check_same(frozen_kappa.grid())?;
    let nt = grid.nt();
    let tau = grid.tau();

    let mut kappa = Field::zeros(grid);
    let mut q1 = BoundaryTrace::zeros(grid, Edge::Gamma1);
    let mut q2 = BoundaryTrace::zeros(grid, Edge::Gamma2);
    for p in 0..nt {
        kappa.level_mut(p).copy_from_slice(frozen_kappa.level(p + 1));
        let w = 2.0 * grid.time_weight(p + 1) / tau;
        for s in 0..q1.len() {
            q1.set(s, p, w * residual1.get(s, p + 1));
        }
        for s in 0..q2.len() {
            q2.set(s, p, w * residual2.get(s, p + 1));
        }
    }
    kappa.level_mut(nt).copy_from_slice(frozen_kappa.level(nt));

    let shifted = solve_linear(&LinearProblem {
        grid,
        beta,
        kappa: &kappa,
        source: None,
        f1: Some(&q1),
        f2: Some(&q2),
        initial: None,
        direction: TimeDirection::Backward,
    })?;

    let mut phi = Field::zeros(grid);
    for n in 1..=nt {
        let w = tau / grid.time_weight(n);
        let src = shifted.level(n - 1).to_vec();
        phi.level_mut(n).iter_mut().zip(src).for_each(|(d, s)| *d = w * s);
    }
    Ok(phi)
}
