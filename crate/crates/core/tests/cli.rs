use std::path::Path;
use std::process::Command;

fn fracflux(config: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fracflux")).arg("--config").arg(config).args(extra).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    let mut rd = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    rd.records().map(|r| r.unwrap()).map(|r| (r[0].to_string(), r[1].to_string())).collect()
}

fn value(rows: &[(String, String)], key: &str) -> String {
    rows.iter().find(|(k, _)| k == key).unwrap().1.clone()
}

#[test]
fn forward_run_writes_summary_and_slices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "fwd.toml",
        "mode = \"forward\"\npreset = \"fwd1\"\n[grid]\nh = 0.1\ntau = 0.01\n[picard]\ntheta_bar = 5e-3\n",
    );
    let out = tmp.path().join("out");
    let o = fracflux(&cfg, &["--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty());
    let rows = summary(&out);
    assert_eq!(value(&rows, "eta_star"), "4");
    assert!(!rows.iter().any(|(k, _)| k == "wall_seconds"));
    let sol = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(sol.starts_with("x,y,t,u,u_exact"));
    assert_eq!(sol.lines().count(), 1 + 11 * 11);
}

#[test]
fn invert_run_has_decreasing_cost_and_flux_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "inv.toml", "mode = \"invert\"\npreset = \"inv1\"\n[grid]\nh = 0.1\ntau = 0.02\n");
    let out = tmp.path().join("out");
    let o = fracflux(&cfg, &["--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let j: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(j.len() > 2 && j.windows(2).all(|w| w[1] < w[0]));
    for f in ["flux_gamma1.csv", "flux_gamma2.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + 11 * 51);
    }
    assert_eq!(value(&summary(&out), "stop_reason"), "discrepancy");
    assert!(!std::fs::read_dir(&out).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn seed_flag_changes_noisy_output_only_when_it_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "n.toml",
        "mode = \"invert\"\npreset = \"inv1\"\n[grid]\nh = 0.1\ntau = 0.02\n[noise]\ngamma = 0.01\nseed = 1\n",
    );
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("flux_gamma1.csv")).unwrap();
    for (dir, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let out = tmp.path().join(dir);
        assert!(fracflux(&cfg, &["--out", out.to_str().unwrap(), "--seed", seed, "--quiet"]).status.success());
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn table_mode_emits_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.toml",
        "mode = \"table\"\npreset = \"inv1\"\n[grid]\nh = 0.1\ntau = 0.02\n[table]\nbetas = [0.3, 0.7]\n",
    );
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_fracflux"))
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
        .env("FRACFLUX_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.starts_with("beta,gamma,epsilon_bar,k_star,error_f1,error_f2,stop_reason"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "mode = \"forward\"\npreset = \"fwd1\"\n[grid]\nh = -1\n");
    let o = fracflux(&bad, &["--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error,2,config,"));

    let o = fracflux(&tmp.path().join("missing.toml"), &[]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(tmp.path(), "m.toml", "mode = \"forward\"\npreset = \"inv2\"\n");
    assert_eq!(fracflux(&cfg, &["--quiet"]).status.code(), Some(4));
    let cfg = write(tmp.path(), "f.toml", "mode = \"invert\"\npreset = \"fwd1\"\n");
    assert_eq!(fracflux(&cfg, &["--mode", "adjoint", "--quiet"]).status.code(), Some(4));

    // A Picard loop that cannot reach its tolerance is a solver failure.
    let cfg = write(
        tmp.path(),
        "s.toml",
        "mode = \"forward\"\npreset = \"fwd1\"\n[grid]\nh = 0.1\ntau = 0.05\n[picard]\ntheta_bar = 1e-14\nmax_outer = 3\n",
    );
    let out = tmp.path().join("s");
    let o = fracflux(&cfg, &["--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error,3,solver,"));
}
