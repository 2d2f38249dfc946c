//! Reconstruction of boundary heat fluxes for a nonlinear time-fractional
//! diffusion equation on the unit square.

pub mod banded;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod frac;
pub mod inverse;
pub mod materials;
pub mod mesh;

pub use error::{Error, Result};
pub use forward::{
    solve_adjoint, solve_linear, solve_nonlinear, solve_nonlinear_with_flux, solve_sensitivity, LinearProblem,
    NonlinearProblem, NonlinearSolution, PicardConfig, SolveReport, TimeDirection,
};
pub use materials::PlasticityModel;
pub use mesh::{BoundaryFlux, BoundaryTrace, Edge, Field, FluxBounds, Grid};
