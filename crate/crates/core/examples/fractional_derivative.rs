//! L1 Caputo derivative of `t^2` against its closed form, and a few
//! Mittag-Leffler values.
use fracflux::frac::{caputo_left_apply, gamma, mittag_leffler, L1Weights};

fn main() -> fracflux::Result<()> {
    let beta = 0.5;
    for nt in [10, 20, 40, 80, 160] {
        let tau = 1.0 / nt as f64;
        let w = L1Weights::new(beta, tau, nt)?;
        let hist: Vec<f64> = (0..=nt).map(|n| (n as f64 * tau).powi(2)).collect();
        let approx = caputo_left_apply(&hist, &w)?;
        let exact = 2.0 / gamma(3.0 - beta);
        println!("nt {nt:4}  D^0.5 t^2 at 1: {approx:.8}  error {:.3e}", (approx - exact).abs());
    }
    for (b, z) in [(0.5, -1.0), (0.3, -2.0), (0.7, -10.0), (1.0, -1.0)] {
        println!("E_{b}({z}) = {:.12}", mittag_leffler(b, z)?);
    }
    Ok(())
}
