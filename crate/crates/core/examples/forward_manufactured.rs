//! Picard iteration on the manufactured forward problem: iterations needed
//! and space-time error for a sweep of stopping tolerances.
//!
//! cargo run --release --example forward_manufactured -- [h] [tau]
use fracflux::experiments::{forward_example1, ExperimentId};
use fracflux::mesh::l2h1_spacetime_norm;
use fracflux::{solve_nonlinear, Grid, PicardConfig};

fn main() -> fracflux::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let h = args.first().copied().unwrap_or(0.1);
    let tau = args.get(1).copied().unwrap_or(0.005);
    let grid = Grid::from_steps(h, tau, 1.0)?;
    let m = forward_example1(0.3, grid, ExperimentId::Fwd1.default_model())?;
    println!("theta_bar  eta_star  error");
    for theta in [5e-3, 1e-3, 5e-4, 1e-4] {
        let sol = solve_nonlinear(&m.problem, &PicardConfig::tolerance(theta))?;
        let err = l2h1_spacetime_norm(&sol.u.try_sub(&m.exact)?);
        println!("{theta:9.0e}  {:8}  {err:.3e}", sol.report.eta_star);
    }
    Ok(())
}
