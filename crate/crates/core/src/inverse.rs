//! Conjugate gradient reconstruction of the two boundary fluxes from
//! Dirichlet observations on the same edges.
//!
//! Cost: `J(f) = 1/2 sum_i ||u(f)|_{Gamma_i} - h_i||^2` over `Gamma_i x (0,T)`.
//! The gradient comes from one backward (adjoint) solve, the step sizes from
//! two sensitivity solves with the coefficient frozen at the current iterate,
//! and the iteration stops by the discrepancy principle `J <= eps_bar`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::experiments::{add_noise, flux_error, NoiseSpec};
use crate::forward::{solve_adjoint, solve_nonlinear_with_flux, solve_sensitivity, NonlinearProblem, PicardConfig};
use crate::mesh::{restrict_to_edge, BoundaryFlux, BoundaryTrace, Edge, Field};

/// Discrepancy level used when the data carry no synthetic noise.
pub const NOISE_FREE_EPSILON_BAR: f64 = 1.25e-7;

/// Boundary measurements `h_i` on Gamma1 and Gamma2.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub h1: BoundaryTrace,
    pub h2: BoundaryTrace,
    pub h1_noisy: Option<BoundaryTrace>,
    pub h2_noisy: Option<BoundaryTrace>,
    pub epsilon_bar: f64,
}

impl Observations {
    pub fn new(h1: BoundaryTrace, h2: BoundaryTrace, epsilon_bar: f64) -> Result<Self> {
        if h1.edge() != Edge::Gamma1 || h2.edge() != Edge::Gamma2 {
            return Err(Error::GridMismatch("observations must live on Gamma1 and Gamma2".into()));
        }
        h1.grid().check_same(h2.grid())?;
        if !(epsilon_bar > 0.0 && epsilon_bar.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon_bar must be > 0, got {epsilon_bar}")));
        }
        Ok(Self { h1, h2, h1_noisy: None, h2_noisy: None, epsilon_bar })
    }

    /// Perturbs both traces and sets `eps_bar = 1/2 sum_i ||h_i^eps - h_i||^2`
    /// (or [`NOISE_FREE_EPSILON_BAR`] when `gamma = 0`).
    pub fn with_noise(h1: BoundaryTrace, h2: BoundaryTrace, noise: &NoiseSpec) -> Result<Self> {
        let mut obs = Self::new(h1, h2, NOISE_FREE_EPSILON_BAR)?;
        if noise.gamma > 0.0 {
            let (n1, e1) = add_noise(&obs.h1, noise)?;
            let (n2, e2) = add_noise(&obs.h2, noise)?;
            obs.epsilon_bar = 0.5 * (e1 * e1 + e2 * e2);
            obs.h1_noisy = Some(n1);
            obs.h2_noisy = Some(n2);
        }
        Ok(obs)
    }

    /// The data actually fitted: noisy if present, exact otherwise.
    pub fn targets(&self) -> (&BoundaryTrace, &BoundaryTrace) {
        (self.h1_noisy.as_ref().unwrap_or(&self.h1), self.h2_noisy.as_ref().unwrap_or(&self.h2))
    }
}

/// Everything one forward solve tells about an iterate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub residual1: BoundaryTrace,
    pub residual2: BoundaryTrace,
    pub frozen_kappa: Field,
}

/// Forward solve at `flux` and boundary residuals `u|_{Gamma_i} - h_i`.
pub fn evaluate(
    problem: &NonlinearProblem,
    flux: &BoundaryFlux,
    obs: &Observations,
    picard: &PicardConfig,
) -> Result<Evaluation> {
    let sol = solve_nonlinear_with_flux(problem, flux, picard)?;
    let (h1, h2) = obs.targets();
    let residual1 = restrict_to_edge(&sol.u, Edge::Gamma1).try_sub(h1)?;
    let residual2 = restrict_to_edge(&sol.u, Edge::Gamma2).try_sub(h2)?;
    let cost = 0.5 * (residual1.norm_sq() + residual2.norm_sq());
    Ok(Evaluation { cost, residual1, residual2, frozen_kappa: sol.frozen_kappa })
}

pub fn cost(problem: &NonlinearProblem, flux: &BoundaryFlux, obs: &Observations, picard: &PicardConfig) -> Result<f64> {
    Ok(evaluate(problem, flux, obs, picard)?.cost)
}

/// `L2(Gamma_i x (0,T))` gradient of `J` from an existing evaluation.
pub fn gradient_at(problem: &NonlinearProblem, eval: &Evaluation) -> Result<(BoundaryTrace, BoundaryTrace)> {
    let phi = solve_adjoint(&eval.residual1, &eval.residual2, &eval.frozen_kappa, problem.grid, problem.beta)?;
    Ok((restrict_to_edge(&phi, Edge::Gamma1).scaled(0.5), restrict_to_edge(&phi, Edge::Gamma2).scaled(0.5)))
}

pub fn gradient(
    problem: &NonlinearProblem,
    flux: &BoundaryFlux,
    obs: &Observations,
    picard: &PicardConfig,
) -> Result<(BoundaryTrace, BoundaryTrace)> {
    gradient_at(problem, &evaluate(problem, flux, obs, picard)?)
}

/// Fletcher-Reeves coefficients `||g_i^k||^2 / ||g_i^{k-1}||^2`.
pub fn fletcher_reeves(now: (&BoundaryTrace, &BoundaryTrace), prev: (&BoundaryTrace, &BoundaryTrace)) -> Result<(f64, f64)> {
    let (p1, p2) = (prev.0.norm_sq(), prev.1.norm_sq());
    if p1 == 0.0 || p2 == 0.0 {
        return Err(Error::VanishedGradient);
    }
    Ok((now.0.norm_sq() / p1, now.1.norm_sq() / p2))
}

/// Boundary traces `(on Gamma1, on Gamma2)` of a sensitivity solution.
pub type SensitivityTraces = (BoundaryTrace, BoundaryTrace);

fn pair_dot(a: &SensitivityTraces, b: (&BoundaryTrace, &BoundaryTrace)) -> f64 {
    a.0.dot_unchecked(b.0) + a.1.dot_unchecked(b.1)
}

/// Minimizer `(zeta1, zeta2)` of the quadratic model
/// `1/2 sum_i ||r_i + zeta1 a_i + zeta2 b_i||^2`, where `a = u0(S1, 0)` and
/// `b = u0(0, S2)` on the two edges.
pub fn step_sizes(a: &SensitivityTraces, b: &SensitivityTraces, r: (&BoundaryTrace, &BoundaryTrace)) -> Result<(f64, f64)> {
    let r1 = pair_dot(a, (&a.0, &a.1));
    let r2 = pair_dot(a, (&b.0, &b.1));
    let r3 = pair_dot(a, r);
    let r4 = pair_dot(b, (&b.0, &b.1));
    let r5 = pair_dot(b, r);
    let det = r2 * r2 - r1 * r4;
    if !(det.abs() >= 1e-14 * r1 * r4) || det == 0.0 {
        return Err(Error::DegenerateStep { det });
    }
    Ok(((r3 * r4 - r2 * r5) / det, (r1 * r5 - r2 * r3) / det))
}

/// Independent 1-D minimizers `-R3/R1`, `-R5/R4`; zero for a null sensitivity.
fn decoupled_step_sizes(a: &SensitivityTraces, b: &SensitivityTraces, r: (&BoundaryTrace, &BoundaryTrace)) -> (f64, f64) {
    let one = |s: &SensitivityTraces| {
        let d = pair_dot(s, (&s.0, &s.1));
        if d > 0.0 {
            -pair_dot(s, r) / d
        } else {
            0.0
        }
    };
    (one(a), one(b))
}

/// Halvings of a step before it is rejected.
const MAX_STEP_HALVINGS: usize = 12;

fn is_forward_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::PicardDiverging { .. } | Error::PicardNotConverged { .. } | Error::NonPositiveCoefficient { .. } | Error::LinearSolve { .. }
    )
}

/// `f + zeta S`, halving `zeta` while the step does not lower the cost or the
/// nonlinear forward problem has no computable solution. The closed-form
/// steps are exact for the frozen-coefficient model only, so strongly
/// nonlinear laws can overshoot. `None` if no step decreases the cost.
fn trial_step(
    problem: &NonlinearProblem,
    obs: &Observations,
    picard: &PicardConfig,
    f: &BoundaryFlux,
    current_cost: f64,
    dir: (&BoundaryTrace, &BoundaryTrace),
    mut zeta: (f64, f64),
) -> Result<Option<(BoundaryFlux, Evaluation, (f64, f64))>> {
    for _ in 0..=MAX_STEP_HALVINGS {
        let mut f_new = BoundaryFlux { f1: f.f1.try_axpy(zeta.0, dir.0)?, f2: f.f2.try_axpy(zeta.1, dir.1)?, bounds: f.bounds };
        f_new.project();
        match evaluate(problem, &f_new, obs, picard) {
            Ok(eval) if eval.cost < current_cost => return Ok(Some((f_new, eval, zeta))),
            Ok(_) => {}
            Err(e) if is_forward_failure(&e) => {}
            Err(e) => return Err(e),
        }
        zeta = (0.5 * zeta.0, 0.5 * zeta.1);
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    StagnatedJ,
    VanishedGradient,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Discrepancy => "discrepancy",
            Self::MaxIter => "max_iter",
            Self::StagnatedJ => "stagnated",
            Self::VanishedGradient => "vanished_gradient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmLimits {
    pub max_iter: usize,
    /// Restart with steepest descent every this many iterations.
    pub restart_every: usize,
}

impl Default for CgmLimits {
    fn default() -> Self {
        Self { max_iter: 2000, restart_every: 50 }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub cost: f64,
    pub grad_norm: (f64, f64),
    /// Step sizes that produced this iterate (zero at `k = 0`).
    pub zeta: (f64, f64),
    /// Conjugate coefficients of the direction that produced this iterate.
    pub vartheta: (f64, f64),
    pub flux_error: Option<(f64, f64)>,
}

/// Iteration state of the conjugate gradient method.
#[derive(Debug, Clone)]
pub struct CgmState {
    pub k: usize,
    pub f: BoundaryFlux,
    pub grad: (BoundaryTrace, BoundaryTrace),
    pub dir: Option<(BoundaryTrace, BoundaryTrace)>,
    pub grad_norm_sq_prev: Option<(f64, f64)>,
    pub j_history: Vec<f64>,
    pub zeta: (f64, f64),
    pub vartheta: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct CgmReport {
    pub k_star: usize,
    pub j_history: Vec<f64>,
    pub grad_norm_history: Vec<(f64, f64)>,
    /// Flux errors per iterate, empty without a reference flux.
    pub error_history: Vec<(f64, f64)>,
    pub reconstructed: BoundaryFlux,
    pub stop_reason: StopReason,
    pub epsilon_bar: f64,
    pub cpu_seconds: f64,
}

impl CgmReport {
    pub fn final_error(&self) -> Option<(f64, f64)> {
        self.error_history.last().copied()
    }
}

/// Inputs of a reconstruction run.
#[derive(Debug, Clone, Copy)]
pub struct CgmSetup<'a> {
    /// Model data; its flux is ignored.
    pub problem: &'a NonlinearProblem,
    pub obs: &'a Observations,
    pub init: &'a BoundaryFlux,
    pub limits: CgmLimits,
    pub picard: PicardConfig,
    /// Reference flux for error reporting.
    pub exact: Option<&'a BoundaryFlux>,
}

/// Runs the conjugate gradient iteration until `J <= eps_bar`, the iteration
/// cap, a vanishing gradient, or a failure to decrease `J` even along the
/// steepest-descent direction.
pub fn run_cgm(setup: &CgmSetup<'_>, mut on_iter: impl FnMut(&IterationRecord)) -> Result<CgmReport> {
    let start = Instant::now();
    let CgmSetup { problem, obs, init, limits, picard, exact } = *setup;
    let grid = problem.grid;
    grid.check_same(init.grid())?;
    grid.check_same(obs.h1.grid())?;
    if limits.restart_every == 0 {
        return Err(Error::InvalidArgument("restart_every must be >= 1".into()));
    }

    let mut f = init.clone();
    f.project();
    let mut eval = evaluate(problem, &f, obs, &picard)?;
    let grad = gradient_at(problem, &eval)?;
    let mut state = CgmState {
        k: 0,
        f,
        grad,
        dir: None,
        grad_norm_sq_prev: None,
        j_history: vec![eval.cost],
        zeta: (0.0, 0.0),
        vartheta: (0.0, 0.0),
    };
    let mut grad_norms = Vec::new();
    let mut errors = Vec::new();
    let mut record = |state: &CgmState, grad_norms: &mut Vec<(f64, f64)>, errors: &mut Vec<(f64, f64)>| -> Result<()> {
        let g = (state.grad.0.norm_sq().sqrt(), state.grad.1.norm_sq().sqrt());
        grad_norms.push(g);
        let err = exact.map(|e| flux_error(&state.f, e)).transpose()?;
        if let Some(e) = err {
            errors.push(e);
        }
        on_iter(&IterationRecord {
            k: state.k,
            cost: *state.j_history.last().unwrap(),
            grad_norm: g,
            zeta: state.zeta,
            vartheta: state.vartheta,
            flux_error: err,
        });
        Ok(())
    };
    record(&state, &mut grad_norms, &mut errors)?;

    let mut force_steepest = false;
    let stop = loop {
        if eval.cost <= obs.epsilon_bar {
            break StopReason::Discrepancy;
        }
        if state.k >= limits.max_iter {
            break StopReason::MaxIter;
        }
        let (g1, g2) = &state.grad;
        if g1.norm_sq() == 0.0 && g2.norm_sq() == 0.0 {
            break StopReason::VanishedGradient;
        }

        let steepest = force_steepest || state.dir.is_none() || state.k.is_multiple_of(limits.restart_every);
        let (vartheta, s1, s2) = match (&state.dir, steepest) {
            (Some((p1, p2)), false) => {
                let prev = state.grad_norm_sq_prev.unwrap();
                if prev.0 == 0.0 || prev.1 == 0.0 {
                    break StopReason::VanishedGradient;
                }
                let th = (g1.norm_sq() / prev.0, g2.norm_sq() / prev.1);
                (th, p1.scaled(th.0).try_sub(g1)?, p2.scaled(th.1).try_sub(g2)?)
            }
            _ => ((0.0, 0.0), g1.scaled(-1.0), g2.scaled(-1.0)),
        };

        let (a, b) = rayon::join(
            || solve_sensitivity(grid, problem.beta, Some(&s1), None, &eval.frozen_kappa),
            || solve_sensitivity(grid, problem.beta, None, Some(&s2), &eval.frozen_kappa),
        );
        let (a, b) = (a?, b?);
        let a = (restrict_to_edge(&a, Edge::Gamma1), restrict_to_edge(&a, Edge::Gamma2));
        let b = (restrict_to_edge(&b, Edge::Gamma1), restrict_to_edge(&b, Edge::Gamma2));
        let r = (&eval.residual1, &eval.residual2);
        let zeta = match step_sizes(&a, &b, r) {
            Ok(z) => z,
            Err(Error::DegenerateStep { .. }) => decoupled_step_sizes(&a, &b, r),
            Err(e) => return Err(e),
        };

        let (f_new, eval_new, zeta) = match trial_step(problem, obs, &picard, &state.f, eval.cost, (&s1, &s2), zeta)? {
            Some(t) => t,
            None if steepest => break StopReason::StagnatedJ,
            None => {
                force_steepest = true;
                continue;
            }
        };
        force_steepest = false;

        let grad_new = gradient_at(problem, &eval_new)?;
        state.grad_norm_sq_prev = Some((g1.norm_sq(), g2.norm_sq()));
        state.grad = grad_new;
        state.dir = Some((s1, s2));
        state.f = f_new;
        state.k += 1;
        state.zeta = zeta;
        state.vartheta = vartheta;
        state.j_history.push(eval_new.cost);
        eval = eval_new;
        record(&state, &mut grad_norms, &mut errors)?;
    };

    Ok(CgmReport {
        k_star: state.k,
        j_history: state.j_history,
        grad_norm_history: grad_norms,
        error_history: errors,
        reconstructed: state.f,
        stop_reason: stop,
        epsilon_bar: obs.epsilon_bar,
        cpu_seconds: start.elapsed().as_secs_f64(),
    })
}
