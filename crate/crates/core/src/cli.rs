//! Command-line front end: config ingestion, sweeps, coefficient tables,
//! fits, single jumps and the oracle self-check.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analytic::{bright_coeff, dark_coeff_variant, qjs, qjs_with_emission, DarkFormula, QjsCoefficients};
use crate::characterization::{self, SweepAxis};
use crate::error::{QjsError, Result};
use crate::field_state::{apply_jump, model_comparator, FockDistribution, JumpModel, JumpOptions};
use crate::oracle;
use crate::params::DetectorParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MATH: i32 = 2;
pub const EXIT_SELFCHECK: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    B,
    Lambda,
}

/// `start:stop:count[:log]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("grid '{s}' is not start:stop:count[:log]"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("grid '{s}': {e}"));
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let count = parts[2].trim().parse::<usize>().map_err(|e| format!("grid '{s}': {e}"))?;
        let log = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(format!("grid spacing must be 'log' or 'lin', got '{other}'")),
        };
        if count < 2 {
            return Err(format!("grid '{s}' needs at least 2 points"));
        }
        if !(stop > start) {
            return Err(format!("grid '{s}' must have stop > start"));
        }
        Ok(GridSpec { start, stop, count, log })
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        characterization::grid(self.start, self.stop, self.count, self.log)
    }
}

/// Everything a run needs, after merging defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda0_nm: f64,
    pub lambda_nm: f64,
    /// Coupling, rad/s.
    pub g: f64,
    pub b: f64,
    pub tau: f64,
    pub nbar: f64,
    /// Additive dark rate, units of `g`.
    pub dark_const: f64,
    pub n_max: usize,
    pub quad_tol: f64,
    pub axis: AxisArg,
    pub grid: Option<GridSpec>,
    pub emission: bool,
    pub fit_range: (usize, usize),
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda0_nm: 500.0,
            lambda_nm: 500.0,
            g: 1e11,
            b: 380.0,
            tau: 5e5,
            nbar: 1e-11,
            dark_const: 0.0,
            n_max: crate::analytic::DEFAULT_N_MAX,
            quad_tol: 1e-6,
            axis: AxisArg::B,
            grid: None,
            emission: false,
            fit_range: (1, 100),
            format: Format::Csv,
            out: None,
            jobs: None,
        }
    }
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> QjsError {
    QjsError::Config(format!("line {line}: {msg}"))
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line_no, format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || value.parse::<f64>().map_err(|e| config_err(line_no, format!("{key}: {e}")));
            let int = || value.parse::<usize>().map_err(|e| config_err(line_no, format!("{key}: {e}")));
            match key {
                "lambda0_nm" => cfg.lambda0_nm = float()?,
                "lambda_nm" => cfg.lambda_nm = float()?,
                "g" => cfg.g = float()?,
                "b" => cfg.b = float()?,
                "tau" => cfg.tau = float()?,
                "nbar" => cfg.nbar = float()?,
                "dark_const" => cfg.dark_const = float()?,
                "n_max" => cfg.n_max = int()?,
                "quad_tol" => cfg.quad_tol = float()?,
                "axis" => {
                    cfg.axis = AxisArg::from_str(value, true).map_err(|e| config_err(line_no, format!("axis: {e}")))?
                }
                "grid" => cfg.grid = Some(value.parse().map_err(|e| config_err(line_no, e))?),
                "emission" => {
                    cfg.emission = value.parse::<bool>().map_err(|e| config_err(line_no, format!("emission: {e}")))?
                }
                "fit_lo" => cfg.fit_range.0 = int()?,
                "fit_hi" => cfg.fit_range.1 = int()?,
                "format" => {
                    cfg.format = Format::from_str(value, true).map_err(|e| config_err(line_no, format!("format: {e}")))?
                }
                "out" => cfg.out = Some(PathBuf::from(value)),
                "jobs" => cfg.jobs = Some(int()?),
                other => return Err(config_err(line_no, format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-2) {
            return Err(QjsError::Config(format!("quad_tol must be in (0, 1e-2], got {}", self.quad_tol)));
        }
        if self.n_max < 1 {
            return Err(QjsError::Config("n_max must be >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(QjsError::Config("jobs must be >= 1".into()));
        }
        if let Some(g) = self.grid {
            if g.count < 2 {
                return Err(QjsError::Config("grid needs at least 2 points".into()));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<DetectorParams> {
        DetectorParams::from_wavelengths(
            self.g,
            self.lambda0_nm * 1e-9,
            self.lambda_nm * 1e-9,
            self.b,
            self.tau,
            self.nbar,
        )?
        .with_dark_const(self.dark_const)
    }

    pub fn sweep_grid(&self) -> Result<Vec<f64>> {
        let spec = self.grid.unwrap_or(match self.axis {
            AxisArg::B => GridSpec {
                start: 10.0,
                stop: 600.0,
                count: 60,
                log: true,
            },
            AxisArg::Lambda => GridSpec {
                start: 400.0,
                stop: 1600.0,
                count: 121,
                log: false,
            },
        });
        spec.points()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qjs",
    version,
    about = "Click-conditioned photon-number maps of a biased two-level detector",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// key = value parameter file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Field wavelength, nm
    #[arg(long = "lambda-nm", global = true)]
    pub lambda_nm: Option<f64>,
    /// Sensor resonance wavelength, nm
    #[arg(long = "lambda0-nm", global = true)]
    pub lambda0_nm: Option<f64>,
    /// Coupling g, rad/s
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Bias gamma / g
    #[arg(long, global = true)]
    pub b: Option<f64>,
    /// Averaging window gamma T
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Mean excitation number of the amplifier
    #[arg(long, global = true)]
    pub nbar: Option<f64>,
    /// Additive dark rate, units of g
    #[arg(long = "dark-const", global = true)]
    pub dark_const: Option<f64>,
    /// Highest photon number in tables and states
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    /// Relative tolerance of the emission quadrature
    #[arg(long = "quad-tol", global = true)]
    pub quad_tol: Option<f64>,
    /// Also integrate the emission term
    #[arg(long, global = true)]
    pub emission: bool,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coefficient tables bright[n], dark[n], emission[n]
    Coeffs,
    /// Counting rates and signal-to-noise along b or the wavelength
    Sweep {
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// start:stop:count[:log]; wavelengths in nm
        #[arg(long)]
        grid: Option<GridSpec>,
    },
    /// Power-law fits of the bright and dark tables
    Fit {
        /// Fit a table previously written by `coeffs --format csv` instead of computing one
        #[arg(long)]
        table: Option<PathBuf>,
        /// lo:hi, inclusive
        #[arg(long)]
        range: Option<String>,
    },
    /// Post-click photon-number distribution
    Jump {
        /// thermal:<mean> | poisson:<mean> | fock:<n> | probs:<p0,p1,...>
        #[arg(long, default_value = "thermal:2")]
        state: String,
        /// Drop emission weight pushed past n_max instead of failing
        #[arg(long)]
        absorb: bool,
    },
    /// Closed forms against the quadrature and ODE oracles
    Selfcheck {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    DarkSign,
}

fn merge(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_kv(&std::fs::read_to_string(path).map_err(|e| {
            QjsError::Config(format!("{}: {e}", path.display()))
        })?)?,
        None => RunConfig::default(),
    };
    macro_rules! take {
        ($($field:ident <- $flag:ident),*) => {
            $(if let Some(v) = common.$flag { cfg.$field = v; })*
        };
    }
    take!(lambda_nm <- lambda_nm, lambda0_nm <- lambda0_nm, g <- g, b <- b, tau <- tau, nbar <- nbar,
          dark_const <- dark_const, n_max <- nmax, quad_tol <- quad_tol, format <- format);
    if common.emission {
        cfg.emission = true;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    Ok(cfg)
}

/// What a subcommand produced, before it is written out.
struct Output {
    text: String,
    failed_checks: bool,
}

fn fmt_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v:e}");
    }
    s
}

#[derive(Serialize)]
struct CoeffRow {
    n: usize,
    bright_g: f64,
    dark_g: f64,
    emission_g: f64,
    bright_norm: f64,
    dark_norm: f64,
}

fn coeff_table(cfg: &RunConfig, params: &DetectorParams) -> Result<QjsCoefficients> {
    if cfg.emission {
        qjs_with_emission(params, cfg.n_max, cfg.quad_tol)
    } else {
        qjs(params, cfg.n_max)
    }
}

fn cmd_coeffs(cfg: &RunConfig) -> Result<Output> {
    let params = cfg.params()?;
    let table = coeff_table(cfg, &params)?;
    let rows: Vec<CoeffRow> = (0..=table.n_max)
        .map(|n| CoeffRow {
            n,
            bright_g: table.bright[n],
            dark_g: table.dark[n],
            emission_g: table.emission[n],
            bright_norm: table.bright[n] / table.bright[1],
            dark_norm: table.dark[n] / table.dark[0],
        })
        .collect();
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("n,bright_g,dark_g,emission_g,bright_norm,dark_norm\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{}",
                    r.n,
                    fmt_row(&[r.bright_g, r.dark_g, r.emission_g, r.bright_norm, r.dark_norm])
                );
            }
            s
        }
        Format::Json => json_text(&json!({
            "g": params.g(),
            "emission_computed": table.emission_computed,
            "rows": rows,
        }))?,
    };
    Ok(Output {
        text,
        failed_checks: false,
    })
}

fn json_text(value: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| QjsError::Io(e.to_string()))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Output> {
    let params = cfg.params()?;
    let grid = cfg.sweep_grid()?;
    let (axis, xs) = match cfg.axis {
        AxisArg::B => (SweepAxis::Bias, grid.clone()),
        AxisArg::Lambda => (SweepAxis::Wavelength, grid.iter().map(|nm| nm * 1e-9).collect()),
    };
    let result = characterization::sweep(&params, axis, &xs)?;
    let breakdown = match axis {
        SweepAxis::Bias => match characterization::find_breakdown(&result) {
            Ok(b) => Some(b),
            Err(e) => {
                log::warn!("breakdown not detected: {e}");
                None
            }
        },
        SweepAxis::Wavelength => None,
    };
    if let Some(b) = breakdown {
        eprintln!("b_B = {b}");
    }
    let g = params.g();
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("x,R_B_g,R_D_g,S,R_B_hz,R_D_hz\n");
            for (p, x) in result.points.iter().zip(&grid) {
                let _ = writeln!(s, "{}", fmt_row(&[*x, p.r_b, p.r_d, p.s, p.r_b * g, p.r_d * g]));
            }
            s
        }
        Format::Json => {
            let points: Vec<_> = result
                .points
                .iter()
                .zip(&grid)
                .map(|(p, x)| {
                    json!({"x": x, "R_B_g": p.r_b, "R_D_g": p.r_d, "S": p.s, "R_B_hz": p.r_b * g, "R_D_hz": p.r_d * g})
                })
                .collect();
            json_text(&json!({
                "axis": match axis { SweepAxis::Bias => "b", SweepAxis::Wavelength => "lambda_nm" },
                "points": points,
                "breakdown": breakdown,
            }))?
        }
    };
    Ok(Output {
        text,
        failed_checks: false,
    })
}

/// Reads the `n,bright_g,dark_g,...` table written by `coeffs`.
pub fn read_coeff_csv(path: &Path) -> Result<QjsCoefficients> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| QjsError::Config("empty table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (bi, di) = match (find("bright_g"), find("dark_g")) {
        (Some(b), Some(d)) => (b, d),
        _ => return Err(QjsError::Config("table needs bright_g and dark_g columns".into())),
    };
    let ei = find("emission_g");
    let (mut bright, mut dark, mut emission) = (vec![], vec![], vec![]);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .ok_or_else(|| QjsError::Config(format!("row {}: missing column", i + 2)))?
                .parse::<f64>()
                .map_err(|e| QjsError::Config(format!("row {}: {e}", i + 2)))
        };
        bright.push(get(bi)?);
        dark.push(get(di)?);
        emission.push(match ei {
            Some(c) => get(c)?,
            None => 0.0,
        });
    }
    QjsCoefficients::from_arrays(bright, dark, emission)
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| QjsError::Config(format!("range '{s}' is not lo:hi")))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| QjsError::Config(format!("range '{s}': {e}")));
    Ok((p(lo)?, p(hi)?))
}

fn cmd_fit(cfg: &RunConfig, table: Option<&Path>, range: Option<&str>) -> Result<Output> {
    let coeffs = match table {
        Some(path) => read_coeff_csv(path)?,
        None => coeff_table(cfg, &cfg.params()?)?,
    };
    let mut range = match range {
        Some(r) => parse_range(r)?,
        None => cfg.fit_range,
    };
    range.1 = range.1.min(coeffs.n_max);
    let bright = characterization::fit_power_law(&coeffs.bright, range)?;
    let dark = if coeffs.dark.iter().all(|&d| d > 0.0) {
        Some(characterization::fit_power_law(&coeffs.dark, range)?)
    } else {
        None
    };
    let mut summary: Vec<(&str, f64)> = vec![
        ("beta_bright", bright.beta),
        ("residual_bright", bright.residual),
        ("n_lo", range.0 as f64),
        ("n_hi", range.1 as f64),
    ];
    if let Some(d) = dark {
        summary.extend([("beta_dark", d.beta), ("residual_dark", d.residual), ("d", d.d)]);
    }
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            for (k, v) in &summary {
                let _ = writeln!(s, "{k},{v}");
            }
            s
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                summary.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            json_text(&serde_json::Value::Object(map))?
        }
    };
    Ok(Output {
        text,
        failed_checks: false,
    })
}

/// Parses a state spec such as `thermal:2` on `n_max + 1` levels.
pub fn parse_state(spec: &str, n_max: usize) -> Result<FockDistribution> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| QjsError::Config(format!("state '{spec}' is not kind:value")))?;
    let float = || arg.trim().parse::<f64>().map_err(|e| QjsError::Config(format!("state '{spec}': {e}")));
    match kind.trim() {
        "thermal" => FockDistribution::thermal(float()?, n_max),
        "poisson" | "coherent" => FockDistribution::poisson(float()?, n_max),
        "fock" => {
            let n = arg.trim().parse::<usize>().map_err(|e| QjsError::Config(format!("state '{spec}': {e}")))?;
            FockDistribution::fock(n, n_max)
        }
        "probs" => {
            let probs = arg
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| QjsError::Config(format!("state '{spec}': {e}")))?;
            FockDistribution::from_weights(probs)
        }
        other => Err(QjsError::Config(format!("unknown state kind '{other}'"))),
    }
}

fn cmd_jump(cfg: &RunConfig, state: &str, absorb: bool) -> Result<Output> {
    let params = cfg.params()?;
    let rho = parse_state(state, cfg.n_max)?;
    let table = coeff_table(cfg, &params)?;
    let out = apply_jump(
        &rho,
        &table,
        JumpOptions {
            truncation_absorb: absorb,
        },
    )?;
    let e_model = model_comparator(&rho, &JumpModel::Exponential, 1.0)?;
    let sd_model = model_comparator(&rho, &JumpModel::SrinivasDavies, 1.0)?;
    let g = params.g();
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("n,prior,posterior,e_model,sd_model\n");
            for n in 0..=rho.n_max() {
                let _ = writeln!(
                    s,
                    "{},{}",
                    n,
                    fmt_row(&[rho.probs()[n], out.state.probs()[n], e_model.probs()[n], sd_model.probs()[n]])
                );
            }
            eprintln!("rate_g = {}, rate_hz = {}, leakage = {}", out.rate, out.rate * g, out.leakage);
            s
        }
        Format::Json => json_text(&json!({
            "rate_g": out.rate,
            "rate_hz": out.rate * g,
            "leakage": out.leakage,
            "prior": rho.probs(),
            "posterior": out.state.probs(),
            "e_model": e_model.probs(),
            "sd_model": sd_model.probs(),
            "tv_e_model": out.state.total_variation(&e_model),
            "tv_sd_model": out.state.total_variation(&sd_model),
        }))?,
    };
    Ok(Output {
        text,
        failed_checks: false,
    })
}

/// One line of the self-check report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub worst: f64,
    pub limit: f64,
    pub passed: bool,
}

/// Runs the mild-parameter oracle grid, the propagator comparison and the
/// truncation guard.
pub fn selfcheck(fault: Option<Fault>) -> Result<Vec<CheckLine>> {
    let formula = match fault {
        Some(Fault::DarkSign) => DarkFormula::SignFault,
        None => DarkFormula::Exact,
    };
    let mut grid = Vec::new();
    for &q in &[0.0, 1.0, 10.0] {
        for &b in &[0.5, 1.0, 5.0] {
            for &tau in &[1.0, 10.0, 50.0] {
                for &nbar in &[0.0, 0.01, 0.1] {
                    for n in 0..=10usize {
                        grid.push((DetectorParams::from_detuning(q, b, tau, nbar)?, n));
                    }
                }
            }
        }
    }
    let errors = grid
        .par_iter()
        .map(|(p, n)| {
            let bright = rel_err(bright_coeff(*n, p)?, oracle::bright_quad(*n, p, 1e-11)?);
            let dark = if p.nbar() > 0.0 {
                rel_err(dark_coeff_variant(*n, p, formula)?, oracle::dark_quad(*n, p, 1e-10)?)
            } else {
                0.0
            };
            Ok((bright, dark))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_bright = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let worst_dark = errors.iter().map(|e| e.1).fold(0.0, f64::max);

    let mut worst_prop: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for (q, b, nbar, carrier) in [(0.0, 1.0, 0.01, 0.0), (1.0, 0.5, 0.1, 3.0), (10.0, 5.0, 0.0, 1.0)] {
        let p = DetectorParams::from_detuning(q, b, 10.0, nbar)?.with_carrier(carrier);
        for &t in &[0.5, 1.0, 2.5, 5.0] {
            let closed = oracle::xt_closed(t, 10, &p)?;
            let ode = oracle::xt_ode(t, 10, &p, 1e-12)?;
            worst_prop = worst_prop.max(closed.max_abs_diff(&ode));
        }
        worst_drift = worst_drift.max(oracle::truncation_drift(5.0, 10, &p, 1e-13)?);
    }
    let line = |name: &str, worst: f64, limit: f64| CheckLine {
        name: name.to_string(),
        worst,
        limit,
        passed: worst < limit,
    };
    Ok(vec![
        line("bright_vs_quadrature", worst_bright, 1e-6),
        line("dark_vs_quadrature", worst_dark, 1e-6),
        line("propagator_vs_ode", worst_prop, 1e-8),
        line("truncation_drift", worst_drift, 1e-10),
    ])
}

fn rel_err(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

fn cmd_selfcheck(cfg: &RunConfig, fault: Option<Fault>) -> Result<Output> {
    let report = selfcheck(fault)?;
    let failed = report.iter().any(|c| !c.passed);
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("check,worst,limit,passed\n");
            for c in &report {
                let _ = writeln!(s, "{},{},{},{}", c.name, c.worst, c.limit, c.passed);
            }
            s
        }
        Format::Json => json_text(&json!({ "checks": report, "passed": !failed }))?,
    };
    Ok(Output {
        text,
        failed_checks: failed,
    })
}

fn exit_code(e: &QjsError) -> i32 {
    match e {
        QjsError::Config(_) => EXIT_USAGE,
        _ => EXIT_MATH,
    }
}

fn execute(cli: &Cli) -> Result<Output> {
    let mut cfg = merge(&cli.common)?;
    if let Command::Sweep { axis, grid } = &cli.command {
        if let Some(a) = axis {
            cfg.axis = *a;
        }
        if grid.is_some() {
            cfg.grid = *grid;
        }
    }
    cfg.validate()?;
    let work = || match &cli.command {
        Command::Coeffs => cmd_coeffs(&cfg),
        Command::Sweep { .. } => cmd_sweep(&cfg),
        Command::Fit { table, range } => cmd_fit(&cfg, table.as_deref(), range.as_deref()),
        Command::Jump { state, absorb } => cmd_jump(&cfg, state, *absorb),
        Command::Selfcheck { inject_fault } => cmd_selfcheck(&cfg, *inject_fault),
    };
    let output = match cfg.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| QjsError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, &output.text)?,
        None => std::io::stdout().write_all(output.text.as_bytes())?,
    }
    Ok(output)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) if out.failed_checks => {
            eprintln!("self-check failed");
            EXIT_SELFCHECK
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses() {
        let g: GridSpec = "10:600:60:log".parse().unwrap();
        assert_eq!((g.start, g.stop, g.count, g.log), (10.0, 600.0, 60, true));
        assert!(!"1:2:3".parse::<GridSpec>().unwrap().log);
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("1:2:1".parse::<GridSpec>().is_err());
        assert!("2:1:5".parse::<GridSpec>().is_err());
        assert!("1:2:5:cubic".parse::<GridSpec>().is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::from_kv("# comment\nlambda_nm = 1000\nb=190 # inline\n\nformat = json\n").unwrap();
        assert_eq!(cfg.lambda_nm, 1000.0);
        assert_eq!(cfg.b, 190.0);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.tau, 5e5);
        assert!(matches!(RunConfig::from_kv("colour = red"), Err(QjsError::Config(_))));
        assert!(matches!(RunConfig::from_kv("b = lots"), Err(QjsError::Config(_))));
        let bad = RunConfig::from_kv("quad_tol = 0.5").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn states_parse() {
        assert_eq!(parse_state("fock:2", 4).unwrap().probs()[2], 1.0);
        assert!((parse_state("thermal:2", 64).unwrap().mean() - 2.0).abs() < 1e-9);
        assert_eq!(parse_state("probs:1,1", 1).unwrap().probs(), &[0.5, 0.5]);
        assert!(parse_state("squeezed:1", 4).is_err());
    }
}
