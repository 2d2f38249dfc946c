//! Synthetic test cases: manufactured forward/backward problems, inverse
//! flux-identification cases, measurement noise and error metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_nonlinear, NonlinearProblem, PicardConfig, TimeDirection};
use crate::frac::{gamma, mittag_leffler};
use crate::materials::PlasticityModel;
use crate::mesh::{l2_norm_boundary, restrict_to_edge, BoundaryFlux, BoundaryTrace, Edge, Field, Grid};

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    /// Forward problem, `u = E_beta(-t^beta)(1-x)(1-y)`.
    Fwd1,
    /// Backward problem, `v = (T-t)^{2 beta}(1-x)(1-y)`.
    Adj2,
    /// Flux identification with `u = t^beta log(2-x)(1-y)`.
    Inv1,
    /// Flux identification with `F = sin(2 pi x y)`, smooth fluxes, no closed form.
    Inv2,
    /// As `Inv2` with the Ramberg-Osgood law of a soft material.
    Inv3Soft,
    /// As `Inv2` with the Ramberg-Osgood law of a stiff material.
    Inv3Stiff,
}

impl ExperimentId {
    pub fn is_inverse(self) -> bool {
        matches!(self, Self::Inv1 | Self::Inv2 | Self::Inv3Soft | Self::Inv3Stiff)
    }

    /// Material law used when a configuration does not name one.
    pub fn default_model(self) -> PlasticityModel {
        match self {
            Self::Inv3Soft => soft_material(),
            Self::Inv3Stiff => stiff_material(),
            Self::Inv1 => PlasticityModel::Rational { k0: 1.0, s0: 4.0 },
            _ => PlasticityModel::rational_unit(),
        }
    }

    pub fn default_beta(self) -> f64 {
        match self {
            Self::Fwd1 | Self::Inv1 | Self::Inv2 => 0.3,
            Self::Adj2 => 0.7,
            Self::Inv3Soft | Self::Inv3Stiff => 0.5,
        }
    }
}

/// Shear compliance of the soft material; both Ramberg-Osgood presets are
/// scaled by it so the soft law has `k = 1` on its elastic plateau.
fn material_scale() -> f64 {
    110.0 / 2.6
}

/// `E = 110`, `T0^2 = 0.02`, `nu = 0.3`, `kappa = 0.5`.
pub fn soft_material() -> PlasticityModel {
    PlasticityModel::RambergOsgood { e_young: 110.0, nu: 0.3, t0_sq: 0.02, kappa: 0.5, scale: material_scale() }
}

/// `E = 210`, `T0^2 = 0.027`, `nu = 0.3`, `kappa = 0.5`.
pub fn stiff_material() -> PlasticityModel {
    PlasticityModel::RambergOsgood { e_young: 210.0, nu: 0.3, t0_sq: 0.027, kappa: 0.5, scale: material_scale() }
}

/// Spatial factor `p(x, y)` of a separable solution with its derivatives
/// `[p, p_x, p_y, p_xx, p_yy, p_xy]`.
pub type SpaceProfile = fn(f64, f64) -> [f64; 6];

fn bilinear_profile(x: f64, y: f64) -> [f64; 6] {
    [(1.0 - x) * (1.0 - y), -(1.0 - y), -(1.0 - x), 0.0, 0.0, 1.0]
}

fn log_profile(x: f64, y: f64) -> [f64; 6] {
    let l = (2.0 - x).ln();
    let d = 2.0 - x;
    [l * (1.0 - y), -(1.0 - y) / d, -l, -(1.0 - y) / (d * d), 0.0, 1.0 / d]
}

/// Data of `D^beta u - div(k(|grad u|^2) grad u) = F` for `u = a(t) p(x, y)`,
/// given `a` and its Caputo derivative (left or right, matching `direction`)
/// at every time level.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub problem: NonlinearProblem,
    pub exact: Field,
    pub exact_flux: BoundaryFlux,
}

pub fn manufacture(
    grid: Grid,
    beta: f64,
    model: PlasticityModel,
    direction: TimeDirection,
    a: &[f64],
    da: &[f64],
    profile: SpaceProfile,
) -> Result<Manufactured> {
    model.validate()?;
    if a.len() != grid.levels() || da.len() != grid.levels() {
        return Err(Error::GridMismatch("time factor must have one value per level".into()));
    }
    let mut source = Field::zeros(grid);
    let mut exact = Field::zeros(grid);
    let mut f1 = BoundaryTrace::zeros(grid, Edge::Gamma1);
    let mut f2 = BoundaryTrace::zeros(grid, Edge::Gamma2);
    for n in 0..grid.levels() {
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = (grid.x(i), grid.y(j));
                let [p, px, py, pxx, pyy, pxy] = profile(x, y);
                let an = a[n];
                let (ux, uy) = (an * px, an * py);
                let (uxx, uyy, uxy) = (an * pxx, an * pyy, an * pxy);
                let s = ux * ux + uy * uy;
                let sx = 2.0 * (ux * uxx + uy * uxy);
                let sy = 2.0 * (ux * uxy + uy * uyy);
                let k = model.k_eval(s)?;
                let dk = model.k_derivative(s)?;
                let div = k * (uxx + uyy) + dk * (sx * ux + sy * uy);
                source.set(i, j, n, da[n] * p - div);
                exact.set(i, j, n, an * p);
                if i == 0 {
                    f1.set(j, n, k * ux);
                }
                if j == 0 {
                    f2.set(i, n, k * uy);
                }
            }
        }
    }
    let start = match direction {
        TimeDirection::Forward => 0,
        TimeDirection::Backward => grid.nt(),
    };
    let initial = exact.level(start).to_vec();
    let exact_flux = BoundaryFlux::new(f1, f2)?;
    Ok(Manufactured {
        problem: NonlinearProblem {
            grid,
            beta,
            model,
            source: Some(source),
            flux: exact_flux.clone(),
            initial: Some(initial),
            direction,
        },
        exact,
        exact_flux,
    })
}

/// `u = E_beta(-t^beta)(1-x)(1-y)`; uses `D^beta E_beta(-t^beta) = -E_beta(-t^beta)`.
pub fn forward_example1(beta: f64, grid: Grid, model: PlasticityModel) -> Result<Manufactured> {
    let a = (0..grid.levels())
        .map(|n| mittag_leffler(beta, -grid.t(n).powf(beta)))
        .collect::<Result<Vec<_>>>()?;
    let da: Vec<f64> = a.iter().map(|v| -v).collect();
    manufacture(grid, beta, model, TimeDirection::Forward, &a, &da, bilinear_profile)
}

/// `v = (T-t)^{2 beta}(1-x)(1-y)` for the backward problem, zero final value.
pub fn adjoint_example2(beta: f64, grid: Grid, model: PlasticityModel) -> Result<Manufactured> {
    let c = gamma(2.0 * beta + 1.0) / gamma(beta + 1.0);
    let big_t = grid.t_final();
    let a: Vec<f64> = (0..grid.levels()).map(|n| (big_t - grid.t(n)).max(0.0).powf(2.0 * beta)).collect();
    let da: Vec<f64> = (0..grid.levels()).map(|n| c * (big_t - grid.t(n)).max(0.0).powf(beta)).collect();
    manufacture(grid, beta, model, TimeDirection::Backward, &a, &da, bilinear_profile)
}

/// A flux-identification case.
#[derive(Debug, Clone)]
pub struct InverseCase {
    pub id: ExperimentId,
    /// Problem with the flux set to zero; the flux is the unknown.
    pub problem: NonlinearProblem,
    pub exact_flux: BoundaryFlux,
    pub h1: BoundaryTrace,
    pub h2: BoundaryTrace,
}

/// `u = t^beta log(2-x)(1-y)` with analytic boundary observations.
pub fn inverse_example1(beta: f64, grid: Grid, model: PlasticityModel) -> Result<InverseCase> {
    let a: Vec<f64> = (0..grid.levels()).map(|n| grid.t(n).powf(beta)).collect();
    let da = vec![gamma(1.0 + beta); grid.levels()];
    let m = manufacture(grid, beta, model, TimeDirection::Forward, &a, &da, log_profile)?;
    let h1 = restrict_to_edge(&m.exact, Edge::Gamma1);
    let h2 = restrict_to_edge(&m.exact, Edge::Gamma2);
    let mut problem = m.problem;
    problem.flux = BoundaryFlux::zeros(grid);
    Ok(InverseCase { id: ExperimentId::Inv1, problem, exact_flux: m.exact_flux, h1, h2 })
}

/// `e^{-t}(t - t^2) sin(3 pi y)` on Gamma1 and `e^{-t}(t - t^2) sin(2 pi x)` on Gamma2.
pub fn smooth_fluxes(grid: Grid) -> Result<BoundaryFlux> {
    use std::f64::consts::PI;
    let w = |t: f64| (-t).exp() * (t - t * t);
    BoundaryFlux::new(
        BoundaryTrace::from_fn(grid, Edge::Gamma1, |y, t| w(t) * (3.0 * PI * y).sin()),
        BoundaryTrace::from_fn(grid, Edge::Gamma2, |x, t| w(t) * (2.0 * PI * x).sin()),
    )
}

/// Grid with half the mesh size and half the time step.
pub fn refined(grid: Grid) -> Result<Grid> {
    Grid::new(2 * grid.nx() - 1, 2 * grid.ny() - 1, 2 * grid.nt(), grid.t_final())
}

/// Source `sin(2 pi x y)`, zero initial data, fluxes from [`smooth_fluxes`].
/// Observations are computed on the refined grid and sampled back, so the
/// inversion never sees data produced by its own discretization.
pub fn inverse_example2(beta: f64, grid: Grid, model: PlasticityModel, picard: &PicardConfig) -> Result<InverseCase> {
    smooth_case(ExperimentId::Inv2, beta, grid, model, picard)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Soft,
    Stiff,
}

/// Ramberg-Osgood material with the fluxes and source of [`inverse_example2`].
pub fn inverse_example3(material: Material, beta: f64, grid: Grid, picard: &PicardConfig) -> Result<InverseCase> {
    let (id, model) = match material {
        Material::Soft => (ExperimentId::Inv3Soft, soft_material()),
        Material::Stiff => (ExperimentId::Inv3Stiff, stiff_material()),
    };
    smooth_case(id, beta, grid, model, picard)
}

fn smooth_case(
    id: ExperimentId,
    beta: f64,
    grid: Grid,
    model: PlasticityModel,
    picard: &PicardConfig,
) -> Result<InverseCase> {
    use std::f64::consts::PI;
    let source = |g: Grid| Field::from_fn(g, |x, y, _| (2.0 * PI * x * y).sin());
    let fine = refined(grid)?;
    let truth = NonlinearProblem {
        grid: fine,
        beta,
        model: model.clone(),
        source: Some(source(fine)),
        flux: smooth_fluxes(fine)?,
        initial: None,
        direction: TimeDirection::Forward,
    };
    let u = solve_nonlinear(&truth, picard)?.u;
    let h1 = restrict_to_edge(&u, Edge::Gamma1).restrict_to(grid, 2)?;
    let h2 = restrict_to_edge(&u, Edge::Gamma2).restrict_to(grid, 2)?;
    let problem = NonlinearProblem {
        grid,
        beta,
        model,
        source: Some(source(grid)),
        flux: BoundaryFlux::zeros(grid),
        initial: None,
        direction: TimeDirection::Forward,
    };
    Ok(InverseCase { id, problem, exact_flux: smooth_fluxes(grid)?, h1, h2 })
}

/// Relative Gaussian noise level and generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gamma: f64,
    pub seed: u64,
}

/// `h + gamma Z ||h||` with `Z` i.i.d. standard normal, drawn from ChaCha8
/// seeded by `spec.seed` on a stream chosen by the edge, so the two edges get
/// independent samples from one seed. Returns the noisy trace and the
/// realized `||h^eps - h||`.
pub fn add_noise(tr: &BoundaryTrace, spec: &NoiseSpec) -> Result<(BoundaryTrace, f64)> {
    if !(spec.gamma >= 0.0 && spec.gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {}", spec.gamma)));
    }
    if spec.gamma == 0.0 {
        return Ok((tr.clone(), 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(match tr.edge() {
        Edge::Gamma1 => 1,
        Edge::Gamma2 => 2,
        Edge::Gamma3 => 3,
        Edge::Gamma4 => 4,
    });
    let amp = spec.gamma * l2_norm_boundary(tr);
    let mut noisy = tr.clone();
    for v in noisy.values_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += amp * z;
    }
    let eps = l2_norm_boundary(&(&noisy - tr));
    Ok((noisy, eps))
}

/// `(||f1 - f1_exact||, ||f2 - f2_exact||)` in `L2(0,T; L2(Gamma_i))`.
pub fn flux_error(fk: &BoundaryFlux, exact: &BoundaryFlux) -> Result<(f64, f64)> {
    Ok((l2_norm_boundary(&fk.f1.try_sub(&exact.f1)?), l2_norm_boundary(&fk.f2.try_sub(&exact.f2)?)))
}
