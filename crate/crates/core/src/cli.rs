//! Command-line front end. [`run_subcommand`] maps every outcome to an exit
//! code: 0 success, 1 solver error, 2 validation failure, 64 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::eigensolve::{self, ScanSettings};
use crate::error::{Error, Result};
use crate::green::{self, GridFunction, Role};
use crate::profiles::validate_profile;
use crate::schatten::{self, KernelPart};
use crate::shooting;
use crate::singular::IntegratingFactor;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "lper", version, about = "Spectral and resolvent diagnostics for L u = iε(f u')' + i u'")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan for real eigenvalues.
    Eigs(Common),
    /// Apply the resolvent to a forcing and write u as CSV.
    Resolve(Common),
    /// Dump the three kernel parts as CSV.
    Kernel(Common),
    /// Singular values, Schatten norms, dyadic bound and the eigenvalue inequality.
    Schatten(Common),
    /// Check the structural assumptions on the profile.
    Validate(Common),
    /// Dump a fundamental solution or the integrating factor as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "phi")]
        kind: TraceKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraceKind {
    Phi,
    Psi,
    Logp,
}

/// Flags shared by every subcommand; unset flags fall back to the config file,
/// then `LPER_*` variables, then defaults.
#[derive(Debug, Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<String>,
    /// Two-column table for --profile tabulated.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long = "lmax")]
    lambda_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_im: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Schatten orders, comma separated.
    #[arg(long = "p")]
    orders: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `random` or a CSV file with columns x, re, im on the kernel grid.
    #[arg(long)]
    forcing: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        put("profile", self.profile.clone());
        put("table", self.table.as_ref().map(|p| p.display().to_string()));
        put("epsilon", self.epsilon.map(|x| x.to_string()));
        put("delta", self.delta.map(|x| x.to_string()));
        put("rtol", self.rtol.map(|x| x.to_string()));
        put("resolution", self.resolution.map(|x| x.to_string()));
        put("lambda_max", self.lambda_max.map(|x| x.to_string()));
        put("lambda_re", self.lambda_re.map(|x| x.to_string()));
        put("lambda_im", self.lambda_im.map(|x| x.to_string()));
        put("grid", self.grid.map(|x| x.to_string()));
        put("orders", self.orders.clone());
        put("levels", self.levels.map(|x| x.to_string()));
        put("panels", self.panels.map(|x| x.to_string()));
        put("samples", self.samples.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("forcing", self.forcing.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        v
    }

    fn resolve<I>(&self, env: I) -> Result<RunConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_text(&std::fs::read_to_string(path)?)?;
        }
        config.apply_env(env)?;
        for (key, value) in self.flags() {
            config.set(key, &value).map_err(|msg| Error::ConfigRange {
                field: format!("--{}", key.replace('_', "-")),
                msg,
            })?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

/// Parse `argv` (including the program name), run, and return the exit code.
/// Environment overrides are read from the process environment.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(argv, std::env::vars())
}

/// As [`run_subcommand`] with an explicit environment.
pub fn run_with_env<I, T, E>(argv: I, env: E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, env) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_SOLVER
            }
        }
    }
}

fn execute<E>(cli: Cli, env: E) -> Result<i32>
where
    E: IntoIterator<Item = (String, String)>,
{
    match cli.command {
        Command::Eigs(c) => eigs(&c.resolve(env)?),
        Command::Resolve(c) => resolve(&c.resolve(env)?),
        Command::Kernel(c) => kernel(&c.resolve(env)?),
        Command::Schatten(c) => schatten_cmd(&c.resolve(env)?),
        Command::Validate(c) => validate(&c.resolve(env)?),
        Command::Trace { common, kind } => trace(&common.resolve(env)?, kind),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(command: &str, config: &RunConfig, result: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    })?;
    s.push('\n');
    Ok(s)
}

fn lambda(config: &RunConfig) -> Complex64 {
    Complex64::new(config.lambda_re, config.lambda_im)
}

fn setup(config: &RunConfig) -> Result<IntegratingFactor> {
    Ok(IntegratingFactor::new(&config.model()?))
}

fn scan(config: &RunConfig, factor: &IntegratingFactor) -> Result<eigensolve::EigenvalueList> {
    eigensolve::scan_and_refine(
        factor,
        ScanSettings {
            lambda_max: config.lambda_max,
            resolution: config.resolution,
        },
        &config.shooting(),
    )
}

#[derive(Serialize)]
struct EigsResult {
    profile: &'static str,
    epsilon: f64,
    c: f64,
    sigma: f64,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    relative_residuals: Vec<f64>,
    multiplicities: Vec<usize>,
    fit_slope: Option<f64>,
    fit_count: usize,
    component: eigensolve::Component,
    indicator_imaginary_residue: f64,
    skipped: Vec<eigensolve::SkippedPoint>,
}

fn eigs(config: &RunConfig) -> Result<i32> {
    let factor = setup(config)?;
    let list = scan(config, &factor)?;
    let count = list.positive().len();
    let model = factor.model();
    let result = EigsResult {
        profile: list.profile,
        epsilon: model.epsilon(),
        c: model.c(),
        sigma: model.sigma(),
        eigenvalues: list.values(),
        residuals: list.eigenvalues.iter().map(|e| e.residual).collect(),
        relative_residuals: list.eigenvalues.iter().map(|e| e.relative_residual).collect(),
        multiplicities: list.eigenvalues.iter().map(|e| e.multiplicity).collect(),
        fit_slope: list.growth_slope(count),
        fit_count: count,
        component: list.component,
        indicator_imaginary_residue: list.indicator_imaginary_residue,
        skipped: list.skipped,
    };
    write_output(config.out.as_deref(), &json("eigs", config, result)?)?;
    Ok(EXIT_OK)
}

fn read_forcing(path: &Path, nodes: &[f64]) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Table(format!("forcing line {}: {e}", n + 1)))?;
        if cols.len() != 3 {
            return Err(Error::Table(format!("forcing line {}: expected x, re, im", n + 1)));
        }
        values.push(Complex64::new(cols[1], cols[2]));
    }
    if values.len() != nodes.len() {
        return Err(Error::GridMismatch {
            expected: nodes.len(),
            got: values.len(),
        });
    }
    Ok(GridFunction {
        nodes: nodes.to_vec(),
        values,
        role: Role::Forcing,
    })
}

#[derive(Serialize)]
struct ResolveSummary {
    a: Complex64,
    periodicity_defect: f64,
    max_modulus: f64,
    residual: green::Residual,
    origin_flux_limits: (Complex64, Complex64),
}

fn resolve(config: &RunConfig) -> Result<i32> {
    let factor = setup(config)?;
    let lam = lambda(config);
    let k = green::assemble_kernel(&factor, lam, config.grid, &config.shooting())?;
    let forcing = match config.forcing.as_str() {
        "random" => green::random_bandlimited(&k.nodes, config.seed, 5),
        path => read_forcing(Path::new(path), &k.nodes)?,
    };
    let u = green::apply_resolvent(&k, &forcing)?;
    let mut csv = String::from("x,re_u,im_u,re_f,im_f\n");
    for ((x, v), f) in u.nodes.iter().zip(&u.values).zip(&forcing.values) {
        let _ = writeln!(csv, "{x},{},{},{},{}", v.re, v.im, f.re, f.im);
    }
    write_output(config.out.as_deref(), &csv)?;
    let summary = ResolveSummary {
        a: green::variation_constants(&k, &forcing)?.a,
        periodicity_defect: u.periodicity_defect(),
        max_modulus: u.max_modulus(),
        residual: green::resolvent_residual(&factor, lam, &u, &forcing, &k.weights, 10.0 * k.delta)?,
        origin_flux_limits: green::origin_flux_limits(&k, &forcing)?,
    };
    if config.out.is_some() {
        write_output(None, &json("resolve", config, summary)?)?;
    }
    Ok(EXIT_OK)
}

fn kernel(config: &RunConfig) -> Result<i32> {
    let factor = setup(config)?;
    let k = green::assemble_kernel(&factor, lambda(config), config.grid, &config.shooting())?;
    let mut csv = String::from("x,s,re_g,im_g,part\n");
    for (name, part) in [("I", &k.part1), ("II", &k.part2), ("III", &k.part3)] {
        for (i, x) in k.nodes.iter().enumerate() {
            for (j, s) in k.nodes.iter().enumerate() {
                let g = part[(i, j)];
                let _ = writeln!(csv, "{x},{s},{},{},{name}", g.re, g.im);
            }
        }
    }
    write_output(config.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SchattenResult {
    singular_values: Vec<f64>,
    norms: Vec<schatten::SchattenNorm>,
    frobenius: f64,
    part_three_rank_one: (f64, f64),
    dyadic: schatten::DyadicBoundReport,
    eigenvalues: Vec<f64>,
    inequality: Vec<schatten::InequalityReport>,
}

fn schatten_cmd(config: &RunConfig) -> Result<i32> {
    let factor = setup(config)?;
    let lam = lambda(config);
    let cfg = config.shooting();
    let k = green::assemble_kernel(&factor, lam, config.grid, &cfg)?;
    let full = schatten::singular_values_with(&k, KernelPart::Total, &config.orders)?;
    let third = schatten::singular_values_with(&k, KernelPart::III, &config.orders)?;
    let dyadic = schatten::dyadic_bound_audit(&factor, lam, config.levels, config.panels, &cfg)?;
    let eigs = scan(config, &factor)?;
    let inequality = config
        .orders
        .iter()
        .filter(|&&p| p > 1.0)
        .map(|&p| schatten::eigen_schatten_inequality(&eigs, &full, lam, p))
        .collect::<Result<_>>()?;
    let result = SchattenResult {
        norms: full.norms.clone(),
        frobenius: full.frobenius,
        part_three_rank_one: (third.values[0], third.values[1]),
        singular_values: full.values,
        dyadic,
        eigenvalues: eigs.values(),
        inequality,
    };
    write_output(config.out.as_deref(), &json("schatten", config, result)?)?;
    Ok(EXIT_OK)
}

fn validate(config: &RunConfig) -> Result<i32> {
    let report = validate_profile(&config.profile()?, config.samples)?;
    let passed = report.passed;
    write_output(config.out.as_deref(), &json("validate", config, report)?)?;
    Ok(if passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn trace(config: &RunConfig, kind: TraceKind) -> Result<i32> {
    let factor = setup(config)?;
    let lam = lambda(config);
    let cfg = config.shooting();
    let mut csv = String::new();
    match kind {
        TraceKind::Logp => {
            csv.push_str("x,log_p,log_p_over_f\n");
            let n = config.samples;
            for k in 1..n {
                let x = std::f64::consts::PI * k as f64 / n as f64;
                let _ = writeln!(csv, "{x},{},{}", factor.log_p(x)?, factor.log_p_over_f(x)?);
            }
        }
        TraceKind::Phi | TraceKind::Psi => {
            let phi = shooting::integrate_phi(&factor, lam, &cfg)?;
            let t = match kind {
                TraceKind::Psi => shooting::integrate_psi_normalized(&factor, lam, &phi, &cfg)?,
                _ => phi,
            };
            csv.push_str("x,re_u,im_u,re_pu,im_pu\n");
            for ((x, u), q) in t.nodes.iter().zip(&t.values).zip(&t.quasi) {
                let _ = writeln!(csv, "{x},{},{},{},{}", u.re, u.im, q.re, q.im);
            }
        }
    }
    write_output(config.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}
