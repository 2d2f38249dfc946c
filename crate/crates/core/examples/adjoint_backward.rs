//! Backward-in-time nonlinear problem with a right Caputo derivative,
//! solved against its manufactured solution.
use fracflux::experiments::{adjoint_example2, ExperimentId};
use fracflux::mesh::l2h1_spacetime_norm;
use fracflux::{solve_nonlinear, Grid, PicardConfig};

fn main() -> fracflux::Result<()> {
    let grid = Grid::from_steps(0.1, 0.005, 1.0)?;
    let m = adjoint_example2(0.7, grid, ExperimentId::Adj2.default_model())?;
    let sol = solve_nonlinear(&m.problem, &PicardConfig::tolerance(1e-4))?;
    let err = l2h1_spacetime_norm(&sol.u.try_sub(&m.exact)?);
    println!("eta_star = {}", sol.report.eta_star);
    for (n, r) in sol.report.residual_history.iter().enumerate().step_by(5) {
        println!("  eta {n:3}  |u^(n+1) - u^(n)| = {r:.3e}");
    }
    println!("error = {err:.3e}");
    Ok(())
}
