//! Adjoint gradient of the boundary misfit against central differences.
use fracflux::inverse::{cost, evaluate, gradient_at, Observations};
use fracflux::mesh::restrict_to_edge;
use fracflux::{
    solve_nonlinear_with_flux, BoundaryFlux, BoundaryTrace, Edge, Field, Grid, NonlinearProblem, PicardConfig,
    PlasticityModel, TimeDirection,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fracflux::Result<()> {
    let grid = Grid::new(11, 11, 50, 1.0)?;
    let problem = NonlinearProblem {
        grid,
        beta: 0.5,
        model: PlasticityModel::constant(1.0),
        source: Some(Field::from_fn(grid, |x, y, t| t * (1.0 - x) * (1.0 - y))),
        flux: BoundaryFlux::zeros(grid),
        initial: None,
        direction: TimeDirection::Forward,
    };
    let truth = BoundaryFlux::new(
        BoundaryTrace::from_fn(grid, Edge::Gamma1, |y, t| t * (1.0 - y)),
        BoundaryTrace::from_fn(grid, Edge::Gamma2, |x, t| -t * x * (1.0 - x)),
    )?;
    let picard = PicardConfig::fixed(1);
    let u = solve_nonlinear_with_flux(&problem, &truth, &picard)?.u;
    let obs = Observations::new(restrict_to_edge(&u, Edge::Gamma1), restrict_to_edge(&u, Edge::Gamma2), 1e-12)?;

    let f = BoundaryFlux::zeros(grid);
    let eval = evaluate(&problem, &f, &obs, &picard)?;
    let (g1, g2) = gradient_at(&problem, &eval)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = 1e-4;
    for d in 0..5 {
        let mut s1 = BoundaryTrace::zeros(grid, Edge::Gamma1);
        let mut s2 = BoundaryTrace::zeros(grid, Edge::Gamma2);
        s1.values_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        s2.values_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let shifted = |c: f64| BoundaryFlux::new(f.f1.try_axpy(c, &s1)?, f.f2.try_axpy(c, &s2)?);
        let fd = (cost(&problem, &shifted(eps)?, &obs, &picard)? - cost(&problem, &shifted(-eps)?, &obs, &picard)?) / (2.0 * eps);
        let adj = g1.dot(&s1)? + g2.dot(&s2)?;
        println!("direction {d}: adjoint {adj:+.10e}  fd {fd:+.10e}  rel {:.2e}", ((adj - fd) / fd).abs());
    }
    Ok(())
}
