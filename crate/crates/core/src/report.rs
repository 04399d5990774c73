//! Run configuration, sweep tables and certificate files.
//!
//! Configs are TOML with the blocks `mode`, `potential` or `setup`, `solver`,
//! `sweep`, `spectro` and `output`. Certificates are written as JSON plus a
//! plain-text summary; sweeps as CSV with a fixed header.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify_1d, Certificate, Verdict};
use crate::error::{Error, Result};
use crate::magnetic2d::{certify_2d, Grid2D, MagneticSetup, TransverseCertificate};
use crate::potential::{PotentialConfig, PotentialSpec, UnitSystem};
use crate::solver1d::SolverOptions;

/// What a config asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "certify-1d")]
    Certify1d,
    #[serde(rename = "sweep-1d")]
    Sweep1d,
    #[serde(rename = "certify-2d")]
    Certify2d,
    #[serde(rename = "spectro")]
    Spectro,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Certify1d => "certify-1d",
            Mode::Sweep1d => "sweep-1d",
            Mode::Certify2d => "certify-2d",
            Mode::Spectro => "spectro",
        })
    }
}

/// Whole-run configuration.
///
/// ```
/// let cfg = trapcert::report::RunConfig::from_toml(r#"
/// mode = "sweep-1d"
/// [potential]
/// kind = "quartic-family"
/// lambda = 0.0
/// omega = 1.0
/// [sweep]
/// parameter = "lambda"
/// values = [0.0, 0.5]
/// "#).unwrap();
/// assert_eq!(cfg.solver.k, 32);
/// assert_eq!(cfg.solver.tau, 1e-10);
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<SetupConfig>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectro: Option<SpectroConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Two-dimensional setup block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupConfig {
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
    #[serde(default = "unit_charge")]
    pub q: f64,
    #[serde(alias = "potential2d")]
    pub potential: PotentialSpec,
    pub grid: GridConfig,
    #[serde(default = "x_axis")]
    pub direction_u: [f64; 2],
    #[serde(rename = "K", alias = "k", default = "default_k_2d")]
    pub k: usize,
}

fn unit_charge() -> f64 {
    1.0
}

fn x_axis() -> [f64; 2] {
    [1.0, 0.0]
}

fn default_k_2d() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
}

/// Either a half-width (square box centred on the origin) or
/// `[x_min, x_max, y_min, y_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxConfig {
    Half(f64),
    Bounds([f64; 4]),
}

impl SetupConfig {
    pub fn to_setup(&self) -> Result<MagneticSetup> {
        let bounds = match self.grid.bounds {
            BoxConfig::Half(h) => [-h, h, -h, h],
            BoxConfig::Bounds(b) => b,
        };
        let grid = Grid2D::new(self.grid.nx, self.grid.ny, bounds)?;
        MagneticSetup::new(self.b, self.q, self.potential.clone(), grid, self.direction_u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "lambda_name")]
    pub parameter: String,
    pub values: Vec<f64>,
}

fn lambda_name() -> String {
    "lambda".into()
}

/// Measured spectroscopic data: gaps and ground-density samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroConfig {
    #[serde(rename = "Delta", alias = "delta")]
    pub delta: f64,
    #[serde(rename = "Gamma", alias = "gamma", default)]
    pub gamma: Option<f64>,
    /// Sample positions (strictly increasing).
    pub x: Vec<f64>,
    /// Ground density at `x`; need not be normalized.
    pub rho: Vec<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for certificate files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Sweep table path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Optional plot-ready companion of the sweep table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Schema-level checks beyond what deserialization enforces.
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if s.k < 2 || !(s.rtol > 0.0) || !(s.tau > 0.0 && s.tau < 1.0) || !(s.tail_tol > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "solver needs K >= 2, rtol > 0, 0 < tau < 1, tail_tol > 0 (got K={}, rtol={}, tau={}, tail_tol={})",
                s.k, s.rtol, s.tau, s.tail_tol
            )));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() || sw.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedSpec("sweep values must be finite and non-empty".into()));
            }
        }
        Ok(())
    }

    /// Fails unless the config's `mode` (if given) is `expected`.
    pub fn expect_mode(&self, expected: Mode) -> Result<()> {
        match self.mode {
            Some(m) if m != expected => Err(Error::MalformedSpec(format!(
                "config mode {m} does not match this subcommand ({expected})"
            ))),
            _ => Ok(()),
        }
    }

    fn potential_1d(&self) -> Result<&PotentialSpec> {
        let p = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::MalformedSpec("missing [potential] block".into()))?;
        if p.dimension() != 1 {
            return Err(Error::MalformedSpec("[potential] must be one-dimensional here".into()));
        }
        Ok(p)
    }
}

/// Files written by a run and whether every verdict passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub all_pass: bool,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("certificate types serialize");
    s.push('\n');
    s
}

/// Fixed-width scientific notation, 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn verdict_lines(out: &mut String, verdicts: &[Verdict]) {
    for v in verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let _ = write!(
            out,
            "  {status} {:<22} lhs {:>24}  rhs {:>24}  tol {:.3e}",
            v.name,
            fmt_f64(v.lhs),
            fmt_f64(v.rhs),
            v.tolerance
        );
        if let Some(note) = &v.note {
            let _ = write!(out, "  ({note})");
        }
        out.push('\n');
    }
}

/// Human-readable digest of a 1D certificate.
pub fn summary_1d(cert: &Certificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "potential: {}", cert.potential.to_toml().replace('\n', "; ").trim_end_matches("; "));
    let _ = writeln!(s, "states used: {}", cert.k_used);
    let _ = writeln!(
        s,
        "E0 {}  E1 {}  E2 {}",
        fmt_f64(cert.energies[0]),
        fmt_f64(cert.energies[1]),
        fmt_f64(cert.energies[2])
    );
    let _ = writeln!(s, "Var(x) {}  bound {}  epsilon {}", fmt_f64(cert.var_x), fmt_f64(cert.bound_x), fmt_f64(cert.epsilon));
    let _ = writeln!(s, "S spectral {}  residual {:.3e}", fmt_f64(cert.s_spectral), cert.trk_residual);
    let _ = writeln!(s, "Var(p) {}  ceiling {}  floor {}", fmt_f64(cert.varp), fmt_f64(cert.varp_ub), fmt_f64(cert.varp_floor));
    let _ = writeln!(s, "verdicts:");
    verdict_lines(&mut s, &cert.verdicts);
    for w in &cert.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "overall: {}", if cert.all_pass() { "PASS" } else { "FAIL" });
    s
}

pub fn summary_2d(cert: &TransverseCertificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "observable {}  B {}  q {}  u {:?}", cert.observable, cert.b, cert.q, cert.u);
    let _ = writeln!(s, "grid spacing {:.4e} (error grid {:.4e})", cert.h_fine, cert.h_coarse);
    let _ = writeln!(s, "energies: {}", cert.energies.iter().map(|e| fmt_f64(*e)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(s, "Var {}  bound {}  epsilon {}", fmt_f64(cert.variance), fmt_f64(cert.bound), fmt_f64(cert.epsilon));
    let _ = writeln!(s, "S direct {}  S spectral {}", fmt_f64(cert.s_direct), fmt_f64(cert.s_spectral));
    let _ = writeln!(s, "verdicts:");
    verdict_lines(&mut s, &cert.verdicts);
    for w in &cert.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "overall: {}", if cert.all_pass() { "PASS" } else { "FAIL" });
    s
}

/// Solve, certify and write `certificate.json` and `summary.txt`.
pub fn run_certify_1d(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.expect_mode(Mode::Certify1d)?;
    let cert = certify_1d(cfg.potential_1d()?, &cfg.solver)?;
    let dir = output_dir(cfg);
    let files = vec![dir.join("certificate.json"), dir.join("summary.txt")];
    write_file(&files[0], &json(&cert))?;
    write_file(&files[1], &summary_1d(&cert))?;
    Ok(RunOutcome {
        all_pass: cert.all_pass(),
        files,
        warnings: cert.warnings.clone(),
    })
}

/// Solve and certify the 2D setup; same files as the 1D run.
pub fn run_certify_2d(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.expect_mode(Mode::Certify2d)?;
    let block = cfg
        .setup
        .as_ref()
        .ok_or_else(|| Error::MalformedSpec("missing [setup] block".into()))?;
    let setup = block.to_setup()?;
    let cert = certify_2d(&setup, block.k, cfg.solver.tau)?;
    let dir = output_dir(cfg);
    let files = vec![dir.join("certificate.json"), dir.join("summary.txt")];
    write_file(&files[0], &json(&cert))?;
    write_file(&files[1], &summary_2d(&cert))?;
    Ok(RunOutcome {
        all_pass: cert.all_pass(),
        files,
        warnings: cert.warnings.clone(),
    })
}

/// Header of the sweep table; the first column is named after the swept
/// parameter.
pub const SWEEP_COLUMNS: [&str; 25] = [
    "lambda",
    "E0",
    "E1",
    "E2",
    "Delta",
    "Gamma",
    "var_x",
    "bound_x",
    "epsilon",
    "T",
    "eta_trk",
    "eta_tilde",
    "d1_rhs",
    "d3_rhs",
    "g_norm_sq",
    "alpha0",
    "alpha_bound",
    "g_xx",
    "varp",
    "varp_ub",
    "varp_lb",
    "varp_floor",
    "verdict",
    "failed_checks",
    "convergence_error",
];

/// One sweep point: either a certificate or the error that stopped it.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<Certificate, Error>,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(c) if c.all_pass())
    }

    fn csv_line(&self) -> String {
        let mut fields = vec![fmt_f64(self.value)];
        match &self.outcome {
            Ok(c) => {
                // Delta and Gamma are the plain spectral gaps E1-E0 and E2-E1.
                let e = &c.energies;
                let numbers = [
                    e[0],
                    e[1],
                    e[2],
                    e[1] - e[0],
                    e[2] - e[1],
                    c.var_x,
                    c.bound_x,
                    c.epsilon,
                    c.tail,
                    c.eta_trk,
                    c.eta_tilde,
                    c.d1_rhs,
                    c.d3_rhs,
                    c.g_norm_sq,
                    c.alpha0,
                    c.alpha_bound,
                    c.g_xx,
                    c.varp,
                    c.varp_ub,
                    c.varp_lb,
                    c.varp_floor,
                ];
                fields.extend(numbers.iter().map(|v| fmt_f64(*v)));
                let failed: Vec<&str> = c.failures().iter().map(|v| v.name.as_str()).collect();
                fields.push(if failed.is_empty() { "PASS" } else { "FAIL" }.into());
                fields.push(failed.join(";"));
                fields.push(fmt_f64(c.provenance.energy_error_estimate.max(c.provenance.var_error_estimate)));
            }
            Err(err) => {
                fields.extend(std::iter::repeat_n("nan".to_string(), 21));
                fields.push("ERROR".into());
                fields.push(err.to_string().replace([',', '\n', '\r'], " "));
                fields.push("nan".into());
            }
        }
        fields.join(",")
    }
}

/// Potential fields a sweep may vary.
pub const SWEEPABLE: [&str; 9] = ["lambda", "omega", "omega_x", "omega_y", "a", "left", "right", "mass", "hbar"];

/// Return `spec` with one parameter replaced.
pub fn with_parameter(spec: &PotentialSpec, name: &str, value: f64) -> Result<PotentialSpec> {
    let mut c = PotentialConfig::from(spec.clone());
    let slot = match name {
        "lambda" => &mut c.lambda,
        "omega" => &mut c.omega,
        "omega_x" => &mut c.omega_x,
        "omega_y" => &mut c.omega_y,
        "a" => &mut c.a,
        "left" => &mut c.left,
        "right" => &mut c.right,
        "mass" => &mut c.mass,
        "hbar" => &mut c.hbar,
        other => {
            return Err(Error::MalformedSpec(format!("cannot sweep parameter `{other}`")));
        }
    };
    *slot = Some(value);
    PotentialSpec::try_from(c)
}

/// Finished sweep: rows in input order plus rendered CSV text.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl SweepTable {
    pub fn header(&self) -> String {
        let mut cols = SWEEP_COLUMNS.to_vec();
        cols[0] = &self.parameter;
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.csv_line());
            s.push('\n');
        }
        s
    }

    /// `parameter, epsilon, varp, varp_ub, varp_lb, varp_ratio` for plotting.
    pub fn plot_csv(&self) -> String {
        let mut s = format!("{},epsilon,varp,varp_ub,varp_lb,varp_ratio\n", self.parameter);
        for row in &self.rows {
            let v = match &row.outcome {
                Ok(c) => [c.epsilon, c.varp, c.varp_ub, c.varp_lb, c.varp / c.varp_ub],
                Err(_) => [f64::NAN; 5],
            };
            let cells: Vec<String> = std::iter::once(row.value).chain(v).map(fmt_f64).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(SweepRow::passed)
    }
}

/// Drop repeated values (keeping the first), with a warning per duplicate.
pub fn dedup_values(values: &[f64]) -> (Vec<f64>, Vec<String>) {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for &v in values {
        // -0.0 and 0.0 are the same sweep point.
        let key = if v == 0.0 { 0u64 } else { v.to_bits() };
        if seen.insert(key) {
            out.push(v);
        } else {
            warnings.push(format!("duplicate sweep value {v} ignored"));
        }
    }
    (out, warnings)
}

/// Certify every sweep value (in parallel) and collect rows in input order.
pub fn sweep(cfg: &RunConfig, workers: Option<usize>) -> Result<SweepTable> {
    let base = cfg.potential_1d()?;
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::MalformedSpec("missing [sweep] block".into()))?;
    if !SWEEPABLE.contains(&sw.parameter.as_str()) {
        return Err(Error::MalformedSpec(format!(
            "cannot sweep parameter `{}` (one of {SWEEPABLE:?})",
            sw.parameter
        )));
    }
    let (values, warnings) = dedup_values(&sw.values);
    for w in &warnings {
        log::warn!("{w}");
    }
    let point = |&value: &f64| SweepRow {
        value,
        outcome: with_parameter(base, &sw.parameter, value).and_then(|spec| certify_1d(&spec, &cfg.solver)),
    };
    let rows = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Io(format!("worker pool: {e}")))?;
            pool.install(|| values.par_iter().map(point).collect())
        }
        None => values.par_iter().map(point).collect(),
    };
    Ok(SweepTable {
        parameter: sw.parameter.clone(),
        rows,
        warnings,
    })
}

/// Run a sweep and write the CSV (and the plot companion if configured).
pub fn run_sweep(cfg: &RunConfig, workers: Option<usize>) -> Result<RunOutcome> {
    cfg.expect_mode(Mode::Sweep1d)?;
    let csv = cfg
        .output
        .csv
        .clone()
        .ok_or_else(|| Error::MalformedSpec("sweep needs an output csv path".into()))?;
    let table = sweep(cfg, workers)?;
    write_file(&csv, &table.to_csv())?;
    let mut files = vec![csv];
    if let Some(plot) = &cfg.output.plot_csv {
        write_file(plot, &table.plot_csv())?;
        files.push(plot.clone());
    }
    Ok(RunOutcome {
        all_pass: table.all_pass(),
        files,
        warnings: table.warnings,
    })
}

/// Consistency of measured data with the sharp bound; tail quantities are
/// bounded from `(Delta, Gamma, epsilon)`, never computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroReport {
    pub delta: f64,
    pub gamma: Option<f64>,
    pub var_x: f64,
    pub bound_x: f64,
    pub epsilon: f64,
    /// Quadrature error estimate of `var_x` (full vs every-other sample).
    pub quadrature_error: f64,
    /// `"consistent"` or `"INCONSISTENT"`.
    pub status: String,
    /// `(Delta/Gamma) epsilon`: upper bound on the tail weight.
    pub tail_bound: Option<f64>,
    /// `Delta (Delta + Gamma) epsilon / (S Gamma)`: upper bound on `eta_trk`.
    pub eta_bound: Option<f64>,
    pub tail_note: String,
}

impl SpectroReport {
    pub fn consistent(&self) -> bool {
        self.status == "consistent"
    }
}

/// Trapezoid moments `(m0, m1, m2)` of samples, optionally every other one.
fn moments(x: &[f64], rho: &[f64], stride: usize) -> (f64, f64, f64) {
    let idx: Vec<usize> = (0..x.len()).step_by(stride).collect();
    let mut m = (0.0, 0.0, 0.0);
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = 0.5 * (x[b] - x[a]);
        m.0 += h * (rho[a] + rho[b]);
        m.1 += h * (rho[a] * x[a] + rho[b] * x[b]);
        m.2 += h * (rho[a] * x[a] * x[a] + rho[b] * x[b] * x[b]);
    }
    m
}

fn variance_of(m: (f64, f64, f64)) -> f64 {
    let mean = m.1 / m.0;
    m.2 / m.0 - mean * mean
}

/// Check measured `(Delta, Gamma, rho_0)` against the sharp bound.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn spectro_check(data: &SpectroConfig) -> Result<SpectroReport> {
    let units = UnitSystem::new(data.hbar, data.mass)?;
    if !(data.delta.is_finite() && data.delta > 0.0) {
        return Err(Error::MalformedSpec(format!("Delta must be positive, got {}", data.delta)));
    }
    if let Some(g) = data.gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::MalformedSpec(format!("Gamma must be positive, got {g}")));
        }
    }
    if data.x.len() != data.rho.len() || data.x.len() < 5 {
        return Err(Error::BadDensity("need at least 5 (x, rho) pairs of equal length".into()));
    }
    if data.x.windows(2).any(|w| !(w[1] > w[0])) || data.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadDensity("sample positions must be finite and increasing".into()));
    }
    if let Some(bad) = data.rho.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::BadDensity(format!("density sample {bad} is negative or non-finite")));
    }
    let full = moments(&data.x, &data.rho, 1);
    if !(full.0 > 0.0 && full.0.is_finite()) {
        return Err(Error::BadDensity("density does not normalize".into()));
    }
    let half = moments(&data.x, &data.rho, 2);
    let var_x = variance_of(full);
    let quadrature_error = if half.0 > 0.0 {
        (var_x - variance_of(half)).abs() / 3.0
    } else {
        f64::INFINITY
    };
    let bound_x = units.kinetic_scale() / data.delta;
    let epsilon = bound_x - var_x;
    let tol = QUADRATURE_FLOOR * bound_x + quadrature_error;
    let status = if epsilon >= -tol { "consistent" } else { "INCONSISTENT" };
    let s = units.kinetic_scale();
    let eps_pos = epsilon.max(0.0);
    let (tail_bound, eta_bound) = match data.gamma {
        Some(g) => (
            Some(data.delta / g * eps_pos),
            Some(data.delta * (data.delta + g) * eps_pos / (s * g)),
        ),
        None => (None, None),
    };
    Ok(SpectroReport {
        delta: data.delta,
        gamma: data.gamma,
        var_x,
        bound_x,
        epsilon,
        quadrature_error,
        status: status.into(),
        tail_bound,
        eta_bound,
        tail_note: "bounded, not computed".into(),
    })
}

const QUADRATURE_FLOOR: f64 = 1e-10;

pub fn summary_spectro(r: &SpectroReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Delta {}  Gamma {}", fmt_f64(r.delta), r.gamma.map_or("none".into(), fmt_f64));
    let _ = writeln!(s, "Var(x) {} (quadrature error {:.3e})", fmt_f64(r.var_x), r.quadrature_error);
    let _ = writeln!(s, "bound {}  epsilon {}", fmt_f64(r.bound_x), fmt_f64(r.epsilon));
    let _ = writeln!(
        s,
        "tail weight <= {}  eta_trk <= {}  ({})",
        r.tail_bound.map_or("n/a".into(), fmt_f64),
        r.eta_bound.map_or("n/a".into(), fmt_f64),
        r.tail_note
    );
    let _ = writeln!(s, "status: {}", r.status);
    s
}

/// Spectroscopic consistency check; writes `spectro.json` and `summary.txt`.
pub fn run_spectro(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.expect_mode(Mode::Spectro)?;
    let data = cfg
        .spectro
        .as_ref()
        .ok_or_else(|| Error::MalformedSpec("missing [spectro] block".into()))?;
    let report = spectro_check(data)?;
    let dir = output_dir(cfg);
    let files = vec![dir.join("spectro.json"), dir.join("summary.txt")];
    write_file(&files[0], &json(&report))?;
    write_file(&files[1], &summary_spectro(&report))?;
    Ok(RunOutcome {
        all_pass: report.consistent(),
        files,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma2: f64) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..=2000).map(|i| -10.0 + i as f64 * 0.01).collect();
        let rho = x.iter().map(|v| (-v * v / (2.0 * sigma2)).exp()).collect();
        (x, rho)
    }

    fn spectro(delta: f64, sigma2: f64) -> SpectroConfig {
        let (x, rho) = gaussian(sigma2);
        SpectroConfig {
            delta,
            gamma: Some(1.0),
            x,
            rho,
            hbar: 1.0,
            mass: 1.0,
        }
    }

    #[test]
    fn spectroscopic_consistency() {
        let ok = spectro_check(&spectro(1.0, 0.5)).unwrap();
        assert!(ok.consistent());
        assert!(ok.epsilon.abs() < 1e-8, "{}", ok.epsilon);
        assert_eq!(ok.tail_note, "bounded, not computed");
        assert!(!spectro_check(&spectro(2.0, 0.5)).unwrap().consistent());
        assert!(!spectro_check(&spectro(1.0, 0.55)).unwrap().consistent());
    }

    #[test]
    fn bad_densities_are_rejected() {
        let mut d = spectro(1.0, 0.5);
        d.rho[3] = -1.0;
        assert!(matches!(spectro_check(&d), Err(Error::BadDensity(_))));
        let mut d = spectro(1.0, 0.5);
        d.rho.iter_mut().for_each(|r| *r = 0.0);
        assert!(matches!(spectro_check(&d), Err(Error::BadDensity(_))));
    }

    #[test]
    fn dedup_keeps_first_and_warns() {
        let (v, w) = dedup_values(&[0.1, 0.2, 0.1, 0.0, -0.0]);
        assert_eq!(v, vec![0.1, 0.2, 0.0]);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn config_schema() {
        let cfg = RunConfig::from_toml(
            "mode = \"certify-2d\"\n[setup]\nB = 1.0\ngrid = { nx = 80, ny = 80, box = 5.0 }\ndirection_u = [0.0, 1.0]\n[setup.potential2d]\nkind = \"quadratic-2d-anisotropic\"\nomega_x = 1.0\nomega_y = 1.0\n",
        )
        .unwrap();
        let setup = cfg.setup.unwrap();
        assert_eq!(setup.k, 12);
        assert_eq!(setup.grid.bounds, BoxConfig::Half(5.0));
        assert!(RunConfig::from_toml("mode = \"certify-1d\"\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("mode = \"certify-1d\"\n[solver]\ntau = 2.0\n").is_err());
        let cfg = RunConfig::from_toml("[solver]\nK = 40\n").unwrap();
        assert_eq!(cfg.solver.k, 40);
        assert!(cfg.expect_mode(Mode::Spectro).is_ok());
    }

    #[test]
    fn parameter_substitution() {
        let spec = with_parameter(&PotentialSpec::quartic(0.0, 1.0), "lambda", 0.3).unwrap();
        assert!((spec.eval_potential(1.0) - 0.8).abs() < 1e-15);
        assert!(with_parameter(&spec, "lambda", -1.0).is_err());
        assert!(with_parameter(&spec, "zeta", 1.0).is_err());
    }
}
