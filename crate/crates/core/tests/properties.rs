use fracflux::experiments::{add_noise, NoiseSpec};
use fracflux::frac::{caputo_left_apply, caputo_right_via_reversal, L1Weights};
use fracflux::mesh::l2_norm_boundary;
use fracflux::{BoundaryTrace, Edge, Grid, PlasticityModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_is_linear(beta in 0.05f64..0.95, n in 1usize..40, a in -3.0f64..3.0, seed in 0u64..1000) {
        let w = L1Weights::new(beta, 1.0 / n as f64, n).unwrap();
        let u: Vec<f64> = (0..=n).map(|m| ((m as u64 * 7919 + seed) % 97) as f64 / 97.0).collect();
        let v: Vec<f64> = (0..=n).map(|m| ((m as f64) * 0.37 + seed as f64).sin()).collect();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(p, q)| p + a * q).collect();
        let lhs = caputo_left_apply(&mix, &w).unwrap();
        let rhs = caputo_left_apply(&u, &w).unwrap() + a * caputo_left_apply(&v, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn l1_of_constant_vanishes(beta in 0.05f64..0.95, n in 1usize..60, c in -10.0f64..10.0) {
        let w = L1Weights::new(beta, 0.5 / n as f64, n).unwrap();
        let hist = vec![c; n + 1];
        prop_assert_eq!(caputo_left_apply(&hist, &w).unwrap(), 0.0);
        prop_assert_eq!(caputo_right_via_reversal(&hist, &w).unwrap(), 0.0);
    }

    #[test]
    fn l1_weights_decrease(beta in 0.05f64..0.95, n in 2usize..200) {
        let w = L1Weights::new(beta, 1.0 / n as f64, n).unwrap();
        prop_assert!(w.b().windows(2).all(|p| p[1] < p[0] && p[1] > 0.0));
    }

    #[test]
    fn rational_law_is_class_k(k0 in 0.1f64..10.0, s0 in 0.1f64..10.0) {
        let law = PlasticityModel::Rational { k0, s0 };
        let rep = law.validate_class_k(0.0, 5.0, 501).unwrap();
        prop_assert!(rep.bounded_ok && rep.monotone_ok);
        prop_assert!(rep.c1 <= k0 * (1.0 + 1e-12));
    }

    #[test]
    fn noise_is_reproducible_and_scales(gamma in 0.0f64..0.1, seed in any::<u64>()) {
        let grid = Grid::new(6, 6, 8, 1.0).unwrap();
        let tr = BoundaryTrace::from_fn(grid, Edge::Gamma1, |y, t| (y + t).cos());
        let spec = NoiseSpec { gamma, seed };
        let (a, ea) = add_noise(&tr, &spec).unwrap();
        let (b, eb) = add_noise(&tr, &spec).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(ea, eb);
        prop_assert!((ea - l2_norm_boundary(&(&a - &tr))).abs() <= 1e-15);
        if gamma > 0.0 {
            let (c, ec) = add_noise(&tr, &NoiseSpec { gamma: 2.0 * gamma, seed }).unwrap();
            prop_assert!((ec - 2.0 * ea).abs() <= 1e-12 * ec.max(1e-300));
            prop_assert!(c.values() != a.values());
        }
    }
}
