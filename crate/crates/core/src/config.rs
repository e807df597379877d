//! Flat `key=value` run configuration.
//!
//! Values are resolved in the order defaults, config file, `LPER_*` environment
//! variables, command-line flags; later sources win. Blank lines and lines
//! starting with `#` are ignored.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::{CoefficientProfile, OperatorModel, TabulatedProfile};
use crate::shooting::ShootingConfig;

pub const ENV_PREFIX: &str = "LPER_";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `sine`, `piecewise-linear` or `tabulated`.
    pub profile: String,
    /// Two-column table for the `tabulated` profile.
    pub table: Option<PathBuf>,
    pub epsilon: f64,
    /// Cutoff near the singular points; `None` selects it from `λ`.
    pub delta: Option<f64>,
    pub rtol: f64,
    pub resolution: f64,
    pub lambda_max: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub grid: usize,
    pub orders: Vec<f64>,
    pub levels: usize,
    pub panels: usize,
    pub samples: usize,
    pub seed: u64,
    /// `random` or a path to a forcing CSV with columns `x, re, im`.
    pub forcing: String,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: "sine".into(),
            table: None,
            epsilon: 1.0,
            delta: None,
            rtol: 1e-12,
            resolution: 0.05,
            lambda_max: 50.0,
            lambda_re: 0.0,
            lambda_im: 1.0,
            grid: 512,
            orders: vec![1.0, 1.5, 2.0, 3.0],
            levels: 6,
            panels: 32,
            samples: 1024,
            seed: 0,
            forcing: "random".into(),
            out: None,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "profile",
    "table",
    "epsilon",
    "delta",
    "rtol",
    "resolution",
    "lambda_max",
    "lambda_re",
    "lambda_im",
    "grid",
    "orders",
    "levels",
    "panels",
    "samples",
    "seed",
    "forcing",
    "out",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}` expects a number, got `{value}`"))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "profile" => self.profile = value.to_string(),
            "table" => self.table = optional_path(value),
            "epsilon" => self.epsilon = number(key, value)?,
            "delta" => {
                self.delta = match value {
                    "auto" | "" => None,
                    v => Some(number(key, v)?),
                }
            }
            "rtol" => self.rtol = number(key, value)?,
            "resolution" => self.resolution = number(key, value)?,
            "lambda_max" => self.lambda_max = number(key, value)?,
            "lambda_re" => self.lambda_re = number(key, value)?,
            "lambda_im" => self.lambda_im = number(key, value)?,
            "grid" => self.grid = number(key, value)?,
            "orders" => {
                self.orders = value
                    .split(',')
                    .map(|p| number(key, p.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "levels" => self.levels = number(key, value)?,
            "panels" => self.panels = number(key, value)?,
            "samples" => self.samples = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "forcing" => self.forcing = value.to_string(),
            "out" => self.out = optional_path(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Overlay `key=value` lines.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: n + 1,
                msg: format!("expected `key=value`, got `{line}`"),
            })?;
            self.set(key.trim(), value)
                .map_err(|msg| Error::ConfigParse { line: n + 1, msg })?;
        }
        Ok(())
    }

    /// Overlay `LPER_<KEY>` variables from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                continue;
            }
            self.set(&key, &value).map_err(|msg| Error::ConfigRange {
                field: format!("{ENV_PREFIX}{}", key.to_ascii_uppercase()),
                msg,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let range = |field: &str, msg: &str| {
            Err(Error::ConfigRange {
                field: field.into(),
                msg: msg.into(),
            })
        };
        match self.profile.as_str() {
            "sine" | "piecewise-linear" => {}
            "tabulated" if self.table.is_some() => {}
            "tabulated" => return range("table", "required for the tabulated profile"),
            _ => return range("profile", "expected sine, piecewise-linear or tabulated"),
        }
        if !(self.epsilon > 0.0 && self.epsilon < PI) {
            return range("epsilon", "must lie in (0, pi)");
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d <= 0.1) {
                return range("delta", "must lie in (0, 0.1]");
            }
        }
        if !(self.rtol > 0.0 && self.rtol <= 1e-3) {
            return range("rtol", "must lie in (0, 1e-3]");
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return range("resolution", "must be positive");
        }
        if !(self.lambda_max >= self.resolution && self.lambda_max.is_finite()) {
            return range("lambda_max", "must be finite and at least the resolution");
        }
        if !(self.lambda_re.is_finite() && self.lambda_im.is_finite()) {
            return range("lambda", "must be finite");
        }
        if self.grid < 64 || !self.grid.is_multiple_of(2) {
            return range("grid", "must be an even integer >= 64");
        }
        if self.orders.is_empty() || self.orders.iter().any(|p| !(*p > 0.0)) {
            return range("orders", "must be a non-empty list of positive numbers");
        }
        if self.levels > 8 {
            return range("levels", "must be at most 8");
        }
        if self.panels < 2 {
            return range("panels", "must be at least 2");
        }
        if self.samples < 16 {
            return range("samples", "must be at least 16");
        }
        Ok(())
    }

    /// Serialize in the file format; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "none".to_string(), |p| p.display().to_string())
        };
        let orders: Vec<String> = self.orders.iter().map(f64::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "profile={}", self.profile);
        let _ = writeln!(s, "table={}", path(&self.table));
        let _ = writeln!(s, "epsilon={}", self.epsilon);
        let _ = writeln!(
            s,
            "delta={}",
            self.delta.map_or_else(|| "auto".to_string(), |d| d.to_string())
        );
        let _ = writeln!(s, "rtol={}", self.rtol);
        let _ = writeln!(s, "resolution={}", self.resolution);
        let _ = writeln!(s, "lambda_max={}", self.lambda_max);
        let _ = writeln!(s, "lambda_re={}", self.lambda_re);
        let _ = writeln!(s, "lambda_im={}", self.lambda_im);
        let _ = writeln!(s, "grid={}", self.grid);
        let _ = writeln!(s, "orders={}", orders.join(","));
        let _ = writeln!(s, "levels={}", self.levels);
        let _ = writeln!(s, "panels={}", self.panels);
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "forcing={}", self.forcing);
        let _ = writeln!(s, "out={}", path(&self.out));
        s
    }

    pub fn profile(&self) -> Result<CoefficientProfile> {
        Ok(match self.profile.as_str() {
            "piecewise-linear" => CoefficientProfile::piecewise_linear(),
            "tabulated" => {
                let path = self.table.as_ref().ok_or_else(|| Error::ConfigRange {
                    field: "table".into(),
                    msg: "required for the tabulated profile".into(),
                })?;
                CoefficientProfile::tabulated(TabulatedProfile::load(path)?)
            }
            _ => CoefficientProfile::sine(),
        })
    }

    pub fn model(&self) -> Result<OperatorModel> {
        OperatorModel::new(self.profile()?, self.epsilon)
    }

    pub fn shooting(&self) -> ShootingConfig {
        ShootingConfig {
            delta: self.delta,
            rtol: self.rtol,
            ..ShootingConfig::default()
        }
    }
}

/// Defaults overlaid with the file at `path`, then validated.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut config = RunConfig::default();
    config.apply_text(&text)?;
    config.validate()?;
    Ok(config)
}
