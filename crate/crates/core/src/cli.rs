//! Run driver behind the `fracflux` binary: a TOML file fully describes a
//! run, results go to CSV files in an output directory.
//!
//! ```toml
//! mode = "invert"          # forward | adjoint | invert | table
//! preset = "inv1"          # fwd1 | adj2 | inv1 | inv2 | inv3_soft | inv3_stiff
//! beta = 0.3
//!
//! [grid]
//! h = 0.1
//! tau = 0.02
//!
//! [noise]
//! gamma = 0.01
//! seed = 7
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{
    adjoint_example2, flux_error, forward_example1, inverse_example1, inverse_example2, inverse_example3, ExperimentId,
    InverseCase, Manufactured, Material, NoiseSpec,
};
use crate::forward::{solve_nonlinear, solve_nonlinear_with_flux, NonlinearSolution, PicardConfig};
use crate::inverse::{run_cgm, CgmLimits, CgmReport, CgmSetup, Observations, StopReason};
use crate::materials::PlasticityModel;
use crate::mesh::{l2h1_spacetime_norm, BoundaryFlux, BoundaryTrace, Edge, Field, Grid};

/// Environment variable capping the worker threads of `table` runs.
pub const THREADS_ENV: &str = "FRACFLUX_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Forward,
    Adjoint,
    Invert,
    Table,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Adjoint => "adjoint",
            Self::Invert => "invert",
            Self::Table => "table",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "adjoint" => Ok(Self::Adjoint),
            "invert" => Ok(Self::Invert),
            "table" => Ok(Self::Table),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
}

fn default_h() -> f64 {
    0.05
}
fn default_tau() -> f64 {
    0.01
}
fn default_t_final() -> f64 {
    1.0
}

impl Default for GridSection {
    fn default() -> Self {
        Self { h: default_h(), tau: default_tau(), t_final: default_t_final() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    /// Stop once successive iterates differ by at most this much.
    pub theta_bar: Option<f64>,
    /// Run exactly this many iterations instead.
    pub eta_star: Option<usize>,
    pub max_outer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgmSection {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Overrides the discrepancy level derived from the noise.
    pub epsilon_bar: Option<f64>,
    #[serde(default = "default_restart")]
    pub restart_every: usize,
}

fn default_max_iter() -> usize {
    2000
}
fn default_restart() -> usize {
    50
}

impl Default for CgmSection {
    fn default() -> Self {
        Self { max_iter: default_max_iter(), epsilon_bar: None, restart_every: default_restart() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Significant digits of every floating-point value.
    #[serde(default = "default_precision")]
    pub precision: usize,
    /// Times at which `solution.csv` samples the field (nearest level).
    #[serde(default = "default_slices")]
    pub slice_times: Vec<f64>,
    /// Adds wall-clock seconds to `summary.csv`; output is then no longer
    /// reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_precision() -> usize {
    17
}
fn default_slices() -> Vec<f64> {
    vec![0.5]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), precision: default_precision(), slice_times: default_slices(), timing: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    /// Defaults to the run's `beta`.
    #[serde(default)]
    pub betas: Vec<f64>,
    /// Noise levels of inverse tables.
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Picard tolerances of forward/adjoint tables.
    #[serde(default)]
    pub theta_bars: Vec<f64>,
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: ExperimentId,
    pub beta: Option<f64>,
    #[serde(default)]
    pub grid: GridSection,
    pub model: Option<PlasticityModel>,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub cgm: CgmSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub table: TableSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| self.preset.default_beta())
    }

    pub fn model(&self) -> PlasticityModel {
        self.model.clone().unwrap_or_else(|| self.preset.default_model())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_steps(self.grid.h, self.grid.tau, self.grid.t_final).map_err(|e| Error::Config(e.to_string()))
    }

    /// Picard rule: explicit `eta_star`, else `theta_bar`; inverse runs
    /// default to 20 fixed iterations, direct runs to `theta_bar = 1e-3`.
    pub fn picard(&self) -> PicardConfig {
        let max_outer = self.picard.max_outer.unwrap_or(200);
        match (self.picard.eta_star, self.picard.theta_bar) {
            (Some(n), _) => PicardConfig::fixed(n),
            (None, Some(t)) => PicardConfig { theta_bar: Some(t), max_outer, fixed_iters: None },
            (None, None) if self.preset.is_inverse() => PicardConfig::fixed(20),
            (None, None) => PicardConfig { theta_bar: Some(1e-3), max_outer, fixed_iters: None },
        }
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let preset = self.preset;
        let compatible = match self.mode {
            Mode::Forward => preset == ExperimentId::Fwd1,
            Mode::Adjoint => preset == ExperimentId::Adj2,
            Mode::Invert => preset.is_inverse(),
            Mode::Table => true,
        };
        if !compatible {
            return Err(Error::ModeMismatch(format!(
                "mode '{}' cannot run preset '{}'",
                self.mode.as_str(),
                preset_name(preset)
            )));
        }
        let cfg = |m: String| Err(Error::Config(m));
        let beta = self.beta();
        if !(beta > 0.0 && beta < 1.0) {
            return cfg(format!("beta must lie in (0,1), got {beta}"));
        }
        self.grid()?;
        self.model().validate().map_err(|e| Error::Config(e.to_string()))?;
        if matches!(self.picard.eta_star, Some(0)) {
            return cfg("picard.eta_star must be >= 1".into());
        }
        if let Some(t) = self.picard.theta_bar {
            if !(t > 0.0) {
                return cfg(format!("picard.theta_bar must be > 0, got {t}"));
            }
        }
        if let Some(e) = self.cgm.epsilon_bar {
            if !(e > 0.0) {
                return cfg(format!("cgm.epsilon_bar must be > 0, got {e}"));
            }
        }
        if self.cgm.restart_every == 0 {
            return cfg("cgm.restart_every must be >= 1".into());
        }
        if !(self.noise.gamma >= 0.0 && self.noise.gamma.is_finite()) {
            return cfg(format!("noise.gamma must be >= 0, got {}", self.noise.gamma));
        }
        if !(1..=17).contains(&self.output.precision) {
            return cfg(format!("output.precision must be in 1..=17, got {}", self.output.precision));
        }
        if self.table.betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return cfg("table.betas must lie in (0,1)".into());
        }
        if self.table.gammas.iter().any(|g| !(*g >= 0.0)) || self.table.theta_bars.iter().any(|t| !(*t > 0.0)) {
            return cfg("table.gammas must be >= 0 and table.theta_bars > 0".into());
        }
        Ok(())
    }
}

pub fn preset_name(id: ExperimentId) -> &'static str {
    match id {
        ExperimentId::Fwd1 => "fwd1",
        ExperimentId::Adj2 => "adj2",
        ExperimentId::Inv1 => "inv1",
        ExperimentId::Inv2 => "inv2",
        ExperimentId::Inv3Soft => "inv3_soft",
        ExperimentId::Inv3Stiff => "inv3_stiff",
    }
}

/// Process exit status for an error: 2 configuration, 4 mode/preset
/// mismatch, 3 solver failure, 1 output failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::ModeMismatch(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 3,
    }
}

/// One-line machine-readable description of a failure.
pub fn error_line(e: &Error) -> String {
    let kind = match e {
        Error::Config(_) => "config",
        Error::ModeMismatch(_) => "mode_mismatch",
        Error::Io(_) | Error::Csv(_) => "output",
        _ => "solver",
    };
    format!("error,{},{kind},{:?}", exit_code(e), e.to_string())
}

fn fmt_f(v: f64, precision: usize) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{:.*e}", precision - 1, v)
}

/// CSV in memory; written out atomically.
struct Table {
    precision: usize,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(precision: usize, header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { precision, writer })
    }

    fn row(&mut self, cells: &[Cell]) -> Result<()> {
        let p = self.precision;
        let rec: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::F(v) => fmt_f(*v, p),
                Cell::I(v) => v.to_string(),
                Cell::S(s) => s.to_string(),
                Cell::Empty => String::new(),
            })
            .collect();
        self.writer.write_record(&rec)?;
        Ok(())
    }

    fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

enum Cell<'a> {
    F(f64),
    I(usize),
    S(&'a str),
    Empty,
}

fn opt(v: Option<f64>) -> Cell<'static> {
    v.map_or(Cell::Empty, Cell::F)
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

struct Summary {
    rows: Vec<(String, String)>,
    precision: usize,
}

impl Summary {
    fn new(cfg: &RunConfig) -> Self {
        let mut s = Self { rows: Vec::new(), precision: cfg.output.precision };
        s.text("mode", cfg.mode.as_str());
        s.text("preset", preset_name(cfg.preset));
        s.float("beta", cfg.beta());
        s
    }
    fn text(&mut self, k: &str, v: &str) {
        self.rows.push((k.into(), v.into()));
    }
    fn float(&mut self, k: &str, v: f64) {
        self.rows.push((k.into(), fmt_f(v, self.precision)));
    }
    fn int(&mut self, k: &str, v: usize) {
        self.rows.push((k.into(), v.to_string()));
    }
    fn grid(&mut self, g: &Grid) {
        self.int("nx", g.nx());
        self.int("ny", g.ny());
        self.int("nt", g.nt());
        self.float("t_final", g.t_final());
    }
    fn bytes(&self) -> Result<Vec<u8>> {
        let mut t = Table::new(self.precision, &["key", "value"])?;
        for (k, v) in &self.rows {
            t.row(&[Cell::S(k), Cell::S(v)])?;
        }
        t.into_bytes()
    }
}

/// Options that do not belong in the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub quiet: bool,
    /// Worker threads for `table`; `None` reads [`THREADS_ENV`], then uses rayon's default.
    pub threads: Option<usize>,
}

/// Names of the files a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<String>,
}

/// Executes a configured run and writes its CSV files.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut out: Vec<(&'static str, Vec<u8>)> = Vec::new();
    let mut summary = Summary::new(cfg);
    match cfg.mode {
        Mode::Forward | Mode::Adjoint => run_direct(cfg, opts, &mut summary, &mut out)?,
        Mode::Invert => run_invert(cfg, opts, &mut summary, &mut out)?,
        Mode::Table => run_table(cfg, opts, &mut summary, &mut out)?,
    }
    if cfg.output.timing {
        summary.float("wall_seconds", start.elapsed().as_secs_f64());
    }
    out.push(("summary.csv", summary.bytes()?));
    let mut files = Vec::new();
    for (name, bytes) in out {
        write_atomic(dir, name, &bytes)?;
        files.push(name.to_string());
    }
    Ok(RunOutcome { files })
}

fn manufactured(cfg: &RunConfig, beta: f64, grid: Grid) -> Result<Manufactured> {
    match cfg.preset {
        ExperimentId::Fwd1 => forward_example1(beta, grid, cfg.model()),
        ExperimentId::Adj2 => adjoint_example2(beta, grid, cfg.model()),
        other => Err(Error::ModeMismatch(format!("preset '{}' has no closed-form field", preset_name(other)))),
    }
}

fn slice_levels(cfg: &RunConfig, grid: &Grid) -> Vec<usize> {
    let mut levels: Vec<usize> = cfg
        .output
        .slice_times
        .iter()
        .map(|t| ((t / grid.tau()).round().max(0.0) as usize).min(grid.nt()))
        .collect();
    levels.dedup();
    levels
}

fn solution_csv(cfg: &RunConfig, u: &Field, exact: Option<&Field>) -> Result<Vec<u8>> {
    let grid = *u.grid();
    let mut t = Table::new(cfg.output.precision, &["x", "y", "t", "u", "u_exact"])?;
    for n in slice_levels(cfg, &grid) {
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                t.row(&[
                    Cell::F(grid.x(i)),
                    Cell::F(grid.y(j)),
                    Cell::F(grid.t(n)),
                    Cell::F(u.get(i, j, n)),
                    opt(exact.map(|e| e.get(i, j, n))),
                ])?;
            }
        }
    }
    t.into_bytes()
}

fn run_direct(
    cfg: &RunConfig,
    opts: &RunOptions,
    summary: &mut Summary,
    out: &mut Vec<(&'static str, Vec<u8>)>,
) -> Result<()> {
    let grid = cfg.grid()?;
    let m = manufactured(cfg, cfg.beta(), grid)?;
    let sol: NonlinearSolution = solve_nonlinear(&m.problem, &cfg.picard())?;
    let err = l2h1_spacetime_norm(&sol.u.try_sub(&m.exact)?);
    if !opts.quiet {
        eprintln!("eta_star={} error={err:.3e}", sol.report.eta_star);
    }
    let mut conv = Table::new(cfg.output.precision, &["eta", "residual"])?;
    for (n, r) in sol.report.residual_history.iter().enumerate() {
        conv.row(&[Cell::I(n), Cell::F(*r)])?;
    }
    out.push(("convergence.csv", conv.into_bytes()?));
    out.push(("solution.csv", solution_csv(cfg, &sol.u, Some(&m.exact))?));
    summary.grid(&grid);
    if let Some(t) = cfg.picard().theta_bar.filter(|_| cfg.picard.eta_star.is_none()) {
        summary.float("theta_bar", t);
    }
    summary.int("eta_star", sol.report.eta_star);
    summary.float("final_residual", *sol.report.residual_history.last().unwrap_or(&0.0));
    summary.float("error_l2h1", err);
    Ok(())
}

/// Builds the inversion data of an inverse preset.
pub fn inverse_case(preset: ExperimentId, beta: f64, grid: Grid, model: PlasticityModel, picard: &PicardConfig) -> Result<InverseCase> {
    match preset {
        ExperimentId::Inv1 => inverse_example1(beta, grid, model),
        ExperimentId::Inv2 => inverse_example2(beta, grid, model, picard),
        ExperimentId::Inv3Soft | ExperimentId::Inv3Stiff => {
            let material = if preset == ExperimentId::Inv3Soft { Material::Soft } else { Material::Stiff };
            let mut case = inverse_example3(material, beta, grid, picard)?;
            if model != case.problem.model {
                // A configured law replaces the material's one for data and inversion alike.
                case = inverse_example2(beta, grid, model, picard)?;
                case.id = preset;
            }
            Ok(case)
        }
        other => Err(Error::ModeMismatch(format!("preset '{}' is not an inverse problem", preset_name(other)))),
    }
}

fn observations(case: &InverseCase, noise: &NoiseSpec, epsilon_bar: Option<f64>) -> Result<Observations> {
    let mut obs = Observations::with_noise(case.h1.clone(), case.h2.clone(), noise)?;
    if let Some(e) = epsilon_bar {
        obs.epsilon_bar = e;
    }
    Ok(obs)
}

fn invert_case(cfg: &RunConfig, case: &InverseCase, gamma: f64, quiet: bool, conv: Option<&mut Table>) -> Result<CgmReport> {
    let picard = cfg.picard();
    let obs = observations(case, &NoiseSpec { gamma, seed: cfg.noise.seed }, cfg.cgm.epsilon_bar)?;
    let init = BoundaryFlux::zeros(case.problem.grid);
    let setup = CgmSetup {
        problem: &case.problem,
        obs: &obs,
        init: &init,
        limits: CgmLimits { max_iter: cfg.cgm.max_iter, restart_every: cfg.cgm.restart_every },
        picard,
        exact: Some(&case.exact_flux),
    };
    let mut conv = conv;
    let mut failure = None;
    let report = run_cgm(&setup, |r| {
        if !quiet {
            eprintln!("k={} J={:.6e} |g|=({:.3e}, {:.3e})", r.k, r.cost, r.grad_norm.0, r.grad_norm.1);
        }
        if let Some(t) = conv.as_deref_mut() {
            let (e1, e2) = r.flux_error.unzip();
            let res = t.row(&[
                Cell::I(r.k),
                Cell::F(r.cost),
                Cell::F(r.grad_norm.0),
                Cell::F(r.grad_norm.1),
                Cell::F(r.zeta.0),
                Cell::F(r.zeta.1),
                Cell::F(r.vartheta.0),
                Cell::F(r.vartheta.1),
                opt(e1),
                opt(e2),
            ]);
            if let Err(e) = res {
                failure.get_or_insert(e);
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn flux_csv(cfg: &RunConfig, edge: Edge, exact: &BoundaryTrace, rec: &BoundaryTrace) -> Result<Vec<u8>> {
    let grid = *exact.grid();
    let coord = if edge == Edge::Gamma1 { "y" } else { "x" };
    let mut t = Table::new(cfg.output.precision, &[coord, "t", "exact", "reconstructed"])?;
    for n in 0..grid.levels() {
        for s in 0..exact.len() {
            t.row(&[Cell::F(grid.edge_coord(edge, s)), Cell::F(grid.t(n)), Cell::F(exact.get(s, n)), Cell::F(rec.get(s, n))])?;
        }
    }
    t.into_bytes()
}

fn run_invert(
    cfg: &RunConfig,
    opts: &RunOptions,
    summary: &mut Summary,
    out: &mut Vec<(&'static str, Vec<u8>)>,
) -> Result<()> {
    let grid = cfg.grid()?;
    let picard = cfg.picard();
    let case = inverse_case(cfg.preset, cfg.beta(), grid, cfg.model(), &picard)?;
    let mut conv = Table::new(
        cfg.output.precision,
        &["k", "cost", "grad_norm_f1", "grad_norm_f2", "zeta_1", "zeta_2", "vartheta_1", "vartheta_2", "error_f1", "error_f2"],
    )?;
    let report = invert_case(cfg, &case, cfg.noise.gamma, opts.quiet, Some(&mut conv))?;
    let rec = &report.reconstructed;
    let u = solve_nonlinear_with_flux(&case.problem, rec, &picard)?.u;
    let (e1, e2) = flux_error(rec, &case.exact_flux)?;

    out.push(("convergence.csv", conv.into_bytes()?));
    out.push(("flux_gamma1.csv", flux_csv(cfg, Edge::Gamma1, &case.exact_flux.f1, &rec.f1)?));
    out.push(("flux_gamma2.csv", flux_csv(cfg, Edge::Gamma2, &case.exact_flux.f2, &rec.f2)?));
    out.push(("solution.csv", solution_csv(cfg, &u, None)?));
    summary.grid(&grid);
    summary.float("gamma", cfg.noise.gamma);
    summary.int("seed", cfg.noise.seed as usize);
    summary.float("epsilon_bar", report.epsilon_bar);
    summary.int("k_star", report.k_star);
    summary.text("stop_reason", report.stop_reason.as_str());
    summary.float("final_cost", *report.j_history.last().unwrap());
    summary.float("error_f1", e1);
    summary.float("error_f2", e2);
    Ok(())
}

/// Column layout of a results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// One row per `(beta, theta_bar)`.
    Direct,
    /// One row per `(beta, gamma)`.
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRow {
    Direct { beta: f64, theta_bar: f64, eta_star: usize, error: f64 },
    Inverse { beta: f64, gamma: f64, epsilon_bar: f64, k_star: usize, error_f1: f64, error_f2: f64, stop: StopReason },
}

/// Renders rows as CSV text; rows of the other kind are rejected.
pub fn emit_table(kind: TableKind, rows: &[TableRow], precision: usize) -> Result<String> {
    let header: &[&str] = match kind {
        TableKind::Direct => &["beta", "theta_bar", "eta_star", "error_l2h1"],
        TableKind::Inverse => &["beta", "gamma", "epsilon_bar", "k_star", "error_f1", "error_f2", "stop_reason"],
    };
    let mut t = Table::new(precision, header)?;
    for row in rows {
        match (kind, row) {
            (TableKind::Direct, TableRow::Direct { beta, theta_bar, eta_star, error }) => {
                t.row(&[Cell::F(*beta), Cell::F(*theta_bar), Cell::I(*eta_star), Cell::F(*error)])?
            }
            (TableKind::Inverse, TableRow::Inverse { beta, gamma, epsilon_bar, k_star, error_f1, error_f2, stop }) => t.row(&[
                Cell::F(*beta),
                Cell::F(*gamma),
                Cell::F(*epsilon_bar),
                Cell::I(*k_star),
                Cell::F(*error_f1),
                Cell::F(*error_f2),
                Cell::S(stop.as_str()),
            ])?,
            _ => return Err(Error::InvalidArgument("table row does not match the table kind".into())),
        }
    }
    String::from_utf8(t.into_bytes()?).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn thread_cap(opts: &RunOptions) -> Result<Option<usize>> {
    if opts.threads.is_some() {
        return Ok(opts.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn run_table(
    cfg: &RunConfig,
    opts: &RunOptions,
    summary: &mut Summary,
    out: &mut Vec<(&'static str, Vec<u8>)>,
) -> Result<()> {
    use rayon::prelude::*;

    let grid = cfg.grid()?;
    let betas = if cfg.table.betas.is_empty() { vec![cfg.beta()] } else { cfg.table.betas.clone() };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap(opts)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let quiet = true;

    let (kind, rows) = if cfg.preset.is_inverse() {
        let gammas = if cfg.table.gammas.is_empty() { vec![0.0, 0.005, 0.01, 0.05] } else { cfg.table.gammas.clone() };
        let picard = cfg.picard();
        let cases = pool.install(|| {
            betas
                .par_iter()
                .map(|&b| inverse_case(cfg.preset, b, grid, cfg.model(), &picard))
                .collect::<Result<Vec<_>>>()
        })?;
        let cells: Vec<(usize, f64)> = (0..betas.len()).flat_map(|i| gammas.iter().map(move |&g| (i, g))).collect();
        let rows = pool.install(|| {
            cells
                .par_iter()
                .map(|&(i, gamma)| {
                    let report = invert_case(cfg, &cases[i], gamma, quiet, None)?;
                    let (error_f1, error_f2) = flux_error(&report.reconstructed, &cases[i].exact_flux)?;
                    Ok(TableRow::Inverse {
                        beta: betas[i],
                        gamma,
                        epsilon_bar: report.epsilon_bar,
                        k_star: report.k_star,
                        error_f1,
                        error_f2,
                        stop: report.stop_reason,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        (TableKind::Inverse, rows)
    } else {
        let thetas = if cfg.table.theta_bars.is_empty() { vec![5e-3, 1e-3, 5e-4, 1e-4] } else { cfg.table.theta_bars.clone() };
        let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| thetas.iter().map(move |&t| (b, t))).collect();
        let max_outer = cfg.picard.max_outer.unwrap_or(200);
        let rows = pool.install(|| {
            cells
                .par_iter()
                .map(|&(beta, theta_bar)| {
                    let m = manufactured(cfg, beta, grid)?;
                    let picard = PicardConfig { theta_bar: Some(theta_bar), max_outer, fixed_iters: None };
                    let sol = solve_nonlinear(&m.problem, &picard)?;
                    let error = l2h1_spacetime_norm(&sol.u.try_sub(&m.exact)?);
                    Ok(TableRow::Direct { beta, theta_bar, eta_star: sol.report.eta_star, error })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        (TableKind::Direct, rows)
    };
    if !opts.quiet {
        eprintln!("{} table rows", rows.len());
    }
    out.push(("table.csv", emit_table(kind, &rows, cfg.output.precision)?.into_bytes()));
    summary.grid(&grid);
    summary.int("rows", rows.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_toml(text).unwrap()
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = cfg("mode = \"forward\"\npreset = \"fwd1\"\n");
        assert_eq!(c.beta(), 0.3);
        assert_eq!(c.grid.h, 0.05);
        assert_eq!(c.output.precision, 17);
        assert_eq!(c.picard().theta_bar, Some(1e-3));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_toml("mode = \"forward\"\npreset = \"fwd1\"\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("mode = \"sideways\"\npreset = \"fwd1\"\n"), Err(Error::Config(_))));
        let c = cfg("mode = \"forward\"\npreset = \"fwd1\"\nbeta = 1.5\n");
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = cfg("mode = \"forward\"\npreset = \"fwd1\"\n[grid]\nh = 0.03\n");
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn mode_preset_mismatch() {
        let c = cfg("mode = \"invert\"\npreset = \"fwd1\"\n");
        let e = c.validate().unwrap_err();
        assert_eq!(exit_code(&e), 4);
        assert!(error_line(&e).starts_with("error,4,mode_mismatch,"));
        assert!(cfg("mode = \"table\"\npreset = \"fwd1\"\n").validate().is_ok());
    }

    #[test]
    fn inline_model_and_picard_rules() {
        let c = cfg("mode = \"invert\"\npreset = \"inv2\"\n[model]\nkind = \"constant\"\nc = 2.0\n[picard]\neta_star = 5\n");
        assert_eq!(c.model(), PlasticityModel::constant(2.0));
        assert_eq!(c.picard(), PicardConfig::fixed(5));
        let c = cfg("mode = \"invert\"\npreset = \"inv2\"\n");
        assert_eq!(c.picard(), PicardConfig::fixed(20));
    }

    #[test]
    fn empty_table_is_header_only() {
        let s = emit_table(TableKind::Inverse, &[], 17).unwrap();
        assert_eq!(s, "beta,gamma,epsilon_bar,k_star,error_f1,error_f2,stop_reason\r\n");
    }

    #[test]
    fn table_rows_use_requested_precision() {
        let rows = [TableRow::Direct { beta: 0.3, theta_bar: 5e-3, eta_star: 4, error: 1.0 / 3.0 }];
        let s = emit_table(TableKind::Direct, &rows, 17).unwrap();
        assert_eq!(
            s.lines().nth(1).unwrap(),
            "2.9999999999999999e-1,5.0000000000000001e-3,4,3.3333333333333331e-1"
        );
        assert!(emit_table(TableKind::Inverse, &rows, 17).is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e-300, -7.125, 123456.789] {
            let s = fmt_f(v, 17);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
