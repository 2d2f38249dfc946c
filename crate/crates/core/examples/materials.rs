//! Coefficient laws `k(|grad u|^2)`: class-K checks and a few samples.
use fracflux::experiments::{soft_material, stiff_material};
use fracflux::PlasticityModel;

fn main() -> fracflux::Result<()> {
    let laws = [
        ("rational k0=1 s0=1", PlasticityModel::rational_unit()),
        ("rational k0=1 s0=4", PlasticityModel::Rational { k0: 1.0, s0: 4.0 }),
        ("ramberg-osgood soft", soft_material()),
        ("ramberg-osgood stiff", stiff_material()),
    ];
    for (name, law) in &laws {
        let rep = law.validate_class_k(0.0, 2.0, 2001)?;
        println!(
            "{name:22} c0 {:.4}  c1 {:.4}  bounded {} monotone {} plateau {} (to {:.3})",
            rep.c0, rep.c1, rep.bounded_ok, rep.monotone_ok, rep.plateau_ok, rep.plateau_end
        );
        let samples: Vec<String> = [0.0, 0.01, 0.05, 0.2, 1.0]
            .iter()
            .map(|&s| law.k_eval(s).map(|k| format!("k({s})={k:.4}")))
            .collect::<fracflux::Result<_>>()?;
        println!("{:22} {}", "", samples.join("  "));
    }
    Ok(())
}
