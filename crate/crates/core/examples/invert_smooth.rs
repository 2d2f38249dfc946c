//! Reconstruction of smooth fluxes whose measurements come from a finer
//! forward solve; prints how fast the cost and the gradient fall.
use fracflux::experiments::{flux_error, inverse_example2, ExperimentId};
use fracflux::inverse::{run_cgm, CgmLimits, CgmSetup, Observations, NOISE_FREE_EPSILON_BAR};
use fracflux::{BoundaryFlux, Grid, PicardConfig};

fn main() -> fracflux::Result<()> {
    let grid = Grid::from_steps(0.1, 0.02, 1.0)?;
    let picard = PicardConfig::fixed(20);
    let case = inverse_example2(0.3, grid, ExperimentId::Inv2.default_model(), &picard)?;
    let obs = Observations::new(case.h1.clone(), case.h2.clone(), NOISE_FREE_EPSILON_BAR)?;
    let init = BoundaryFlux::zeros(grid);
    let setup = CgmSetup {
        problem: &case.problem,
        obs: &obs,
        init: &init,
        limits: CgmLimits { max_iter: 200, ..CgmLimits::default() },
        picard,
        exact: Some(&case.exact_flux),
    };
    let report = run_cgm(&setup, |r| {
        println!("k {:3}  J {:.4e}  |g1| {:.3e}  |g2| {:.3e}", r.k, r.cost, r.grad_norm.0, r.grad_norm.1);
    })?;
    let (e1, e2) = flux_error(&report.reconstructed, &case.exact_flux)?;
    println!("{} after {} iterations; errors {e1:.3e} {e2:.3e}", report.stop_reason.as_str(), report.k_star);
    Ok(())
}
