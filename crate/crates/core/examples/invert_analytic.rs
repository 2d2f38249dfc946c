//! Conjugate gradient reconstruction of both boundary fluxes from boundary
//! measurements with a closed-form exact solution.
//!
//! cargo run --release --example invert_analytic -- [gamma] [seed]
use fracflux::experiments::{flux_error, inverse_example1, ExperimentId, NoiseSpec};
use fracflux::inverse::{run_cgm, CgmLimits, CgmSetup, Observations};
use fracflux::{BoundaryFlux, Grid, PicardConfig};

fn main() -> fracflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);
    let grid = Grid::from_steps(0.1, 0.02, 1.0)?;
    let case = inverse_example1(0.3, grid, ExperimentId::Inv1.default_model())?;
    let obs = Observations::with_noise(case.h1.clone(), case.h2.clone(), &NoiseSpec { gamma, seed })?;
    let init = BoundaryFlux::zeros(grid);
    let setup = CgmSetup {
        problem: &case.problem,
        obs: &obs,
        init: &init,
        limits: CgmLimits::default(),
        picard: PicardConfig::fixed(20),
        exact: Some(&case.exact_flux),
    };
    let report = run_cgm(&setup, |r| {
        let (e1, e2) = r.flux_error.unwrap_or_default();
        println!("k {:3}  J {:.4e}  E1 {e1:.3e}  E2 {e2:.3e}", r.k, r.cost);
    })?;
    let (e1, e2) = flux_error(&report.reconstructed, &case.exact_flux)?;
    println!(
        "stop: {} at k* = {} (epsilon_bar {:.3e}); errors {e1:.3e} {e2:.3e}",
        report.stop_reason.as_str(),
        report.k_star,
        report.epsilon_bar
    );
    Ok(())
}
