//! Plasticity coefficient `k(T^2)` of the nonlinear diffusion term, where
//! `T^2 = |grad u|^2` is the squared stress intensity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{nodal_grad_sq, Field};

/// A plasticity law `T^2 -> k(T^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlasticityModel {
    /// `k = c`.
    Constant { c: f64 },
    /// Ramberg-Osgood engineering law: `k = 1/G` up to the yield level
    /// `t0_sq`, then `(1/G) (T^2/t0_sq)^{(kappa-1)/2}`. `scale` multiplies
    /// the whole law so that it can be brought to O(1).
    RambergOsgood {
        e_young: f64,
        nu: f64,
        t0_sq: f64,
        kappa: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `k = k0 / (1 + T^2 / s0)`.
    Rational { k0: f64, s0: f64 },
    /// Piecewise-linear interpolation of `(T^2, k)` samples sorted by `T^2`,
    /// held constant outside the sampled range.
    Tabulated { samples: Vec<(f64, f64)> },
}

fn unit_scale() -> f64 {
    1.0
}

impl PlasticityModel {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn ramberg_osgood(e_young: f64, nu: f64, t0_sq: f64, kappa: f64) -> Self {
        Self::RambergOsgood { e_young, nu, t0_sq, kappa, scale: 1.0 }
    }

    /// `1 / (1 + T^2)`.
    pub fn rational_unit() -> Self {
        Self::Rational { k0: 1.0, s0: 1.0 }
    }

    /// Checks the parameters once; evaluation assumes a valid model.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Self::Constant { c } if !(*c > 0.0 && c.is_finite()) => bad(format!("constant k must be > 0, got {c}")),
            Self::RambergOsgood { e_young, nu, t0_sq, kappa, scale } => {
                if !(*e_young > 0.0) || !(*nu > -1.0 && *nu < 0.5) {
                    return bad(format!("invalid elastic constants E={e_young}, nu={nu}"));
                }
                if !(*t0_sq > 0.0) || !(*kappa > 0.0 && *kappa <= 1.0) || !(*scale > 0.0) {
                    return bad(format!("invalid yield/hardening t0_sq={t0_sq}, kappa={kappa}, scale={scale}"));
                }
                Ok(())
            }
            Self::Rational { k0, s0 } if !(*k0 > 0.0 && *s0 > 0.0) => bad(format!("rational law needs k0, s0 > 0, got {k0}, {s0}")),
            Self::Tabulated { samples } => {
                if samples.len() < 2 {
                    return bad("tabulated law needs at least two samples".into());
                }
                if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("tabulated T^2 samples must be strictly increasing".into());
                }
                if samples.iter().any(|s| !(s.1 > 0.0)) {
                    return bad("tabulated k values must be positive".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Elastic shear modulus `G = E / (2(1+nu))` of a Ramberg-Osgood law.
    pub fn shear_modulus(&self) -> Option<f64> {
        match self {
            Self::RambergOsgood { e_young, nu, .. } => Some(e_young / (2.0 * (1.0 + nu))),
            _ => None,
        }
    }

    /// Whether `k` does not depend on `T^2`.
    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    /// `k(t_sq)`.
    pub fn k_eval(&self, t_sq: f64) -> Result<f64> {
        if !(t_sq >= 0.0) {
            return Err(Error::InvalidArgument(format!("T^2 must be >= 0, got {t_sq}")));
        }
        Ok(self.eval_unchecked(t_sq))
    }

    pub(crate) fn eval_unchecked(&self, t_sq: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::RambergOsgood { t0_sq, kappa, scale, .. } => {
                let compliance = scale / self.shear_modulus().unwrap_or(1.0);
                if t_sq <= *t0_sq {
                    compliance
                } else {
                    compliance * (t_sq / t0_sq).powf(0.5 * (kappa - 1.0))
                }
            }
            Self::Rational { k0, s0 } => k0 / (1.0 + t_sq / s0),
            Self::Tabulated { samples } => interpolate(samples, t_sq).0,
        }
    }

    /// `k'(t_sq)`; one-sided (right) derivative at kinks.
    pub fn k_derivative(&self, t_sq: f64) -> Result<f64> {
        if !(t_sq >= 0.0) {
            return Err(Error::InvalidArgument(format!("T^2 must be >= 0, got {t_sq}")));
        }
        Ok(match self {
            Self::Constant { .. } => 0.0,
            Self::RambergOsgood { t0_sq, kappa, .. } => {
                if t_sq < *t0_sq {
                    0.0
                } else {
                    let p = 0.5 * (kappa - 1.0);
                    self.eval_unchecked(t_sq) * p / t_sq
                }
            }
            Self::Rational { k0, s0 } => {
                let d = 1.0 + t_sq / s0;
                -k0 / (s0 * d * d)
            }
            Self::Tabulated { samples } => interpolate(samples, t_sq).1,
        })
    }

    /// Validates the law against the class-K conditions on `[lo, hi]`.
    pub fn validate_class_k(&self, lo: f64, hi: f64, samples: usize) -> Result<ClassKReport> {
        if !(lo >= 0.0 && hi > lo) || samples < 2 {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}] or too few samples")));
        }
        self.validate()?;
        let pts: Vec<f64> = (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
            .collect();
        let ks: Vec<f64> = pts.iter().map(|&s| self.eval_unchecked(s)).collect();
        let c0 = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let c1 = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * c1.abs();
        let monotone_ok = ks.windows(2).all(|w| w[1] - w[0] <= tol);
        let plateau_len = ks.iter().take_while(|&&k| (k - ks[0]).abs() <= tol).count();
        let plateau_ok = plateau_len >= 2;
        let plateau_end = pts[plateau_len - 1];
        Ok(ClassKReport { c0, c1, monotone_ok, plateau_ok, plateau_end, bounded_ok: c0 > 0.0 && c1.is_finite() })
    }
}

/// Returns the interpolated value and the slope of the active segment.
fn interpolate(samples: &[(f64, f64)], s: f64) -> (f64, f64) {
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if s <= first.0 {
        return (first.1, 0.0);
    }
    if s >= last.0 {
        return (last.1, 0.0);
    }
    let idx = samples.partition_point(|p| p.0 <= s);
    let (a, b) = (samples[idx - 1], samples[idx]);
    let slope = (b.1 - a.1) / (b.0 - a.0);
    (a.1 + slope * (s - a.0), slope)
}

/// Empirical class-K check of a plasticity law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKReport {
    /// Smallest sampled `k`.
    pub c0: f64,
    /// Largest sampled `k`.
    pub c1: f64,
    /// `0 < c0` and `c1` finite.
    pub bounded_ok: bool,
    /// Finite-difference `k' <= 0` on every sample interval.
    pub monotone_ok: bool,
    /// `k` is constant on an initial segment of the range.
    pub plateau_ok: bool,
    /// Last sampled `T^2` of that initial constant segment.
    pub plateau_end: f64,
}

/// `k(|grad u|^2)` at every node of time level `n`, using the same stencil as
/// the `H^1` norm.
pub fn k_field(model: &PlasticityModel, u: &Field, n: usize) -> Result<Vec<f64>> {
    let grid = u.grid();
    if n >= grid.levels() {
        return Err(Error::InvalidArgument(format!("level {n} beyond nt = {}", grid.nt())));
    }
    nodal_grad_sq(grid, u.level(n)).into_iter().map(|s| model.k_eval(s)).collect()
}
