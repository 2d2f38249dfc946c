//! Drives a complete run from an inline TOML description, exactly as the
//! `fracflux` binary does, and lists the files it wrote.
use fracflux::cli::{run, RunConfig, RunOptions};

const CONFIG: &str = r#"
mode = "invert"
preset = "inv3_soft"
beta = 0.5

[grid]
h = 0.1
tau = 0.02

[noise]
gamma = 0.01
seed = 3
"#;

fn main() -> fracflux::Result<()> {
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.output.dir = std::env::temp_dir().join("fracflux-run-config");
    let out = run(&cfg, &RunOptions { quiet: true, threads: None })?;
    for f in out.files {
        println!("{}", cfg.output.dir.join(f).display());
    }
    print!("{}", std::fs::read_to_string(cfg.output.dir.join("summary.csv"))?);
    Ok(())
}
