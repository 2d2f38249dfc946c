//! Discrete Caputo derivatives on a uniform time grid (L1 scheme) and the
//! Mittag-Leffler function used to build manufactured solutions.
//!
//! With `b_j = (j+1)^{1-beta} - j^{1-beta}` and `scale = tau^{-beta} / Gamma(2-beta)`,
//! the left derivative at `t_n` is
//!
//! ```text
//! D^beta u(t_n) ~ scale * sum_{j=0}^{n-1} b_j (u^{n-j} - u^{n-j-1})
//! ```
//!
//! The right derivative `D^beta_{T-}` is the left one applied to the
//! time-reversed sequence.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gamma function (Lanczos, relative accuracy ~1e-15 on the positive axis).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Weight table of the L1 scheme for a fixed order and step.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    beta: f64,
    tau: f64,
    b: Vec<f64>,
    scale: f64,
}

impl L1Weights {
    /// Weights `b_0 .. b_{nt-1}`.
    pub fn new(beta: f64, tau: f64, nt: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("order beta must lie in (0,1), got {beta}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {tau}")));
        }
        let p = 1.0 - beta;
        let b = (0..nt.max(1)).map(|j| ((j + 1) as f64).powf(p) - (j as f64).powf(p)).collect();
        let scale = tau.powf(-beta) / gamma(2.0 - beta);
        Ok(Self { beta, tau, b, scale })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Coefficients of the lower-triangular Toeplitz form:
    /// `D u^n = sum_{m=0}^{n} c_{n-m} u^m`, with `c_0 = scale * b_0`,
    /// `c_k = scale * (b_k - b_{k-1})` for `0 < k < n` and the `u^0` term
    /// `-scale * b_{n-1}` handled separately by [`L1Weights::initial_coeff`].
    pub fn memory_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            self.scale * self.b[0]
        } else {
            self.scale * (self.b[k] - self.b[k - 1])
        }
    }

    /// Coefficient multiplying `u^0` in the derivative at level `n >= 1`.
    pub fn initial_coeff(&self, n: usize) -> f64 {
        -self.scale * self.b[n - 1]
    }
}

/// L1 approximation of the left Caputo derivative at the last entry of
/// `history = [u^0, ..., u^n]`.
pub fn caputo_left_apply(history: &[f64], w: &L1Weights) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InvalidArgument("history needs at least two levels".into()));
    }
    let n = history.len() - 1;
    if n > w.b.len() {
        return Err(Error::InvalidArgument(format!(
            "history of {n} steps exceeds the {} weights",
            w.b.len()
        )));
    }
    let sum: f64 = (0..n).map(|j| w.b[j] * (history[n - j] - history[n - j - 1])).sum();
    Ok(w.scale * sum)
}

/// L1 approximation of the right Caputo derivative `D^beta_{T-}` at the
/// first entry of `history = [u(t), u(t + tau), ..., u(T)]`.
pub fn caputo_right_via_reversal(history: &[f64], w: &L1Weights) -> Result<f64> {
    let reversed: Vec<f64> = history.iter().rev().copied().collect();
    caputo_left_apply(&reversed, w)
}

const ML_TERM_TOL: f64 = 1e-16;
const ML_MAX_TERMS: usize = 200;

/// Mittag-Leffler function `E_{beta,1}(z)` for `beta in (0,1]`, `z <= 0`.
///
/// Uses the power series for `|z| <= 1` and, beyond that, the Laplace
/// representation `E_beta(-s^beta) = int_0^inf e^{-r s} K_beta(r) dr` with
/// the nonnegative spectral density `K_beta`.
pub fn mittag_leffler(beta: f64, z: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0,1], got {beta}")));
    }
    if !(z <= 0.0 && z.is_finite()) {
        return Err(Error::InvalidArgument(format!("argument must be finite and <= 0, got {z}")));
    }
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z >= -1.0 {
        if let Some(v) = ml_series(beta, z) {
            return Ok(v);
        }
    }
    Ok(ml_laplace(beta, -z))
}

fn ml_series(beta: f64, z: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut zp = 1.0;
    for m in 0..ML_MAX_TERMS {
        let term = zp / gamma(beta * m as f64 + 1.0);
        sum += term;
        if term.abs() < ML_TERM_TOL && m > 0 {
            return Some(sum);
        }
        zp *= z;
    }
    None
}

/// `E_beta(-x)` for `x > 0` by trapezoid quadrature in `v = ln r`.
fn ml_laplace(beta: f64, x: f64) -> f64 {
    let s = x.powf(1.0 / beta);
    let (sin_b, cos_b) = (beta * PI).sin_cos();
    let integrand = |v: f64| {
        let r = v.exp();
        let rb = r.powf(beta);
        (-r * s).exp() * sin_b / PI * rb / (rb * rb + 2.0 * rb * cos_b + 1.0)
    };
    // Left tail decays like e^{beta v}, right tail like exp(-s e^v).
    let lo = -40.0 / beta;
    let hi = (40.0 / s).ln().max(1.0);
    // The density peaks near r = 1 with width ~ sin(beta pi) as beta -> 1.
    let dv = (0.05 * sin_b).min(0.01);
    let steps = ((hi - lo) / dv).ceil() as usize;
    let dv = (hi - lo) / steps as f64;
    let mut sum = 0.5 * (integrand(lo) + integrand(hi));
    for k in 1..steps {
        sum += integrand(lo + k as f64 * dv);
    }
    sum * dv
}
