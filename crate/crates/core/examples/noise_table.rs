//! Discrepancy-stopped reconstructions for several noise levels, emitted as
//! a CSV table.
use fracflux::cli::{emit_table, TableKind, TableRow};
use fracflux::experiments::{flux_error, inverse_example1, ExperimentId, NoiseSpec};
use fracflux::inverse::{run_cgm, CgmLimits, CgmSetup, Observations};
use fracflux::{BoundaryFlux, Grid, PicardConfig};

fn main() -> fracflux::Result<()> {
    let beta = 0.3;
    let grid = Grid::from_steps(0.1, 0.02, 1.0)?;
    let case = inverse_example1(beta, grid, ExperimentId::Inv1.default_model())?;
    let init = BoundaryFlux::zeros(grid);
    let mut rows = Vec::new();
    for gamma in [0.0, 0.005, 0.01, 0.05] {
        let obs = Observations::with_noise(case.h1.clone(), case.h2.clone(), &NoiseSpec { gamma, seed: 42 })?;
        let setup = CgmSetup {
            problem: &case.problem,
            obs: &obs,
            init: &init,
            limits: CgmLimits::default(),
            picard: PicardConfig::fixed(20),
            exact: None,
        };
        let report = run_cgm(&setup, |_| {})?;
        let (error_f1, error_f2) = flux_error(&report.reconstructed, &case.exact_flux)?;
        rows.push(TableRow::Inverse {
            beta,
            gamma,
            epsilon_bar: report.epsilon_bar,
            k_star: report.k_star,
            error_f1,
            error_f2,
            stop: report.stop_reason,
        });
    }
    print!("{}", emit_table(TableKind::Inverse, &rows, 6)?);
    Ok(())
}
