//! Coefficient profiles `f` and the operator model `(f, ε)`.
//!
//! Every profile is `2π`-periodic, odd, antiperiodic under `x ↦ x + π`, positive on
//! `(0, π)` and normalized by `f'(0) = 2/π`. Only the half period `[0, π]` is ever
//! described; values on `[-π, 0)` come from oddness.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Slope `f'(0)` every admissible profile must have.
pub const NORMALIZATION_SLOPE: f64 = FRAC_2_PI;

/// Constant `c` in the local exponents `±c/ε`.
pub const C: f64 = FRAC_PI_2;

/// Validation tolerance for closed-form models.
pub const MODEL_TOLERANCE: f64 = 1e-10;

/// Validation tolerance for tabulated profiles.
pub const TABULATED_TOLERANCE: f64 = 1e-6;

/// Profile read from samples of `f` on a uniform grid over `[0, π]`.
///
/// Internally the table stores `q(x) = f(x) / (x (π - x))` and interpolates `q`
/// with a cubic Hermite (Catmull-Rom) spline. At both ends `q` is pinned to
/// `2/π²`, which makes `f'(0) = -f'(π) = 2/π` hold for the interpolant; the
/// data's own slope is checked separately by [`validate_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    step: f64,
    samples: Vec<f64>,
    q: Vec<f64>,
}

impl TabulatedProfile {
    /// Builds a table from samples `f(k π / n)`, `k = 0..=n`.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 5 {
            return Err(Error::Table(format!(
                "need at least 5 samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Table(format!("non-finite sample {bad}")));
        }
        let n = samples.len() - 1;
        let step = PI / n as f64;
        let pinned = NORMALIZATION_SLOPE / PI;
        let q = samples
            .iter()
            .enumerate()
            .map(|(k, &fk)| {
                if k == 0 || k == n {
                    pinned
                } else {
                    let x = k as f64 * step;
                    fk / (x * (PI - x))
                }
            })
            .collect();
        Ok(Self { step, samples, q })
    }

    /// Parses the two-column `x f(x)` text format (whitespace separated, `x`
    /// ascending and uniform on `[0, π]`). Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Table(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Table(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(a)?);
            fs.push(parse(b)?);
        }
        if xs.len() < 5 {
            return Err(Error::Table(format!("need at least 5 rows, got {}", xs.len())));
        }
        let n = xs.len() - 1;
        let step = PI / n as f64;
        for (k, &x) in xs.iter().enumerate() {
            if (x - k as f64 * step).abs() > 1e-9 {
                return Err(Error::Table(format!(
                    "row {}: x = {x} is not on the uniform grid k*pi/{n} over [0, pi]",
                    k + 1
                )));
            }
        }
        Self::from_samples(fs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Samples a closed-form half-period function into a table with `n` intervals.
    pub fn sample(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let step = PI / n as f64;
        Self::from_samples((0..=n).map(|k| f(k as f64 * step)).collect())
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.step)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Secant slope of the data at the origin, `f(x₁)/x₁`.
    pub fn data_slope(&self) -> f64 {
        self.samples[1] / self.step
    }

    fn q_at(&self, x: f64) -> f64 {
        let n = self.q.len() - 1;
        let t = (x / self.step).clamp(0.0, n as f64);
        let k = (t.floor() as usize).min(n - 1);
        let u = t - k as f64;
        let slope = |j: usize| -> f64 {
            if j == 0 {
                self.q[1] - self.q[0]
            } else if j == n {
                self.q[n] - self.q[n - 1]
            } else {
                0.5 * (self.q[j + 1] - self.q[j - 1])
            }
        };
        let (y0, y1, m0, m1) = (self.q[k], self.q[k + 1], slope(k), slope(k + 1));
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `f(x) = (2/π) sin x`.
    Sine,
    /// Tent `2x/π` on `[0, π/2]`, `(2/π)(π - x)` on `[π/2, π]`, extended oddly.
    PiecewiseLinear,
    Tabulated(TabulatedProfile),
}

/// A coefficient profile `f` on `[-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    kind: ProfileKind,
}

impl fmt::Display for CoefficientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl CoefficientProfile {
    pub fn sine() -> Self {
        Self {
            kind: ProfileKind::Sine,
        }
    }

    pub fn piecewise_linear() -> Self {
        Self {
            kind: ProfileKind::PiecewiseLinear,
        }
    }

    pub fn tabulated(table: TabulatedProfile) -> Self {
        Self {
            kind: ProfileKind::Tabulated(table),
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Sine => "sine",
            ProfileKind::PiecewiseLinear => "piecewise-linear",
            ProfileKind::Tabulated(_) => "tabulated",
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI
    }

    pub fn normalization_slope(&self) -> f64 {
        NORMALIZATION_SLOPE
    }

    pub fn tolerance(&self) -> f64 {
        match self.kind {
            ProfileKind::Tabulated(_) => TABULATED_TOLERANCE,
            _ => MODEL_TOLERANCE,
        }
    }

    /// Declared points of non-differentiability in `[-π, π]`, ascending.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            ProfileKind::PiecewiseLinear => vec![-FRAC_PI_2, FRAC_PI_2],
            _ => Vec::new(),
        }
    }

    /// Kinks inside the half period `(0, π)`.
    pub fn interior_kinks(&self) -> Vec<f64> {
        self.kinks().into_iter().filter(|&k| k > 0.0 && k < PI).collect()
    }

    /// `f(x)` for `x ∈ [-π, π]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_period(x)?;
        Ok(self.value(x))
    }

    /// `f'(x)` for `x ∈ [-π, π]` away from declared kinks.
    pub fn eval_prime(&self, x: f64) -> Result<f64> {
        check_period(x)?;
        if let Some(&k) = self.kinks().iter().find(|&&k| (x - k).abs() < 1e-12) {
            return Err(Error::Kink(k));
        }
        Ok(self.derivative(x))
    }

    /// Unchecked evaluation; `x` is assumed to lie in `[-π, π]`.
    pub(crate) fn value(&self, x: f64) -> f64 {
        if x < 0.0 {
            return -self.half_value(-x);
        }
        self.half_value(x)
    }

    fn half_value(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Sine => FRAC_2_PI * x.sin(),
            ProfileKind::PiecewiseLinear => FRAC_2_PI * x.min(PI - x),
            ProfileKind::Tabulated(t) => x * (PI - x) * t.q_at(x),
        }
    }

    pub(crate) fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Sine => FRAC_2_PI * x.cos(),
            ProfileKind::PiecewiseLinear => {
                if x.abs() < FRAC_PI_2 {
                    FRAC_2_PI
                } else {
                    -FRAC_2_PI
                }
            }
            ProfileKind::Tabulated(t) => {
                let h = 1e-3 * t.step;
                let lo = (x - h).max(-PI);
                let hi = (x + h).min(PI);
                (self.value(hi) - self.value(lo)) / (hi - lo)
            }
        }
    }

    /// Bounded part of `1/f` on `[0, π]`:
    /// `1/f(s) - (π/2)(1/s + 1/(π - s))`, extended continuously to both ends.
    pub(crate) fn reciprocal_remainder(&self, s: f64) -> f64 {
        match &self.kind {
            ProfileKind::Sine => {
                // 1/sin(s) - 1/s - 1/(π - s); symmetric about π/2.
                let d = s.min(PI - s);
                let near = if d < 1e-2 {
                    let d2 = d * d;
                    d * (1.0 / 6.0 + d2 * (7.0 / 360.0 + d2 * 31.0 / 15120.0))
                } else {
                    1.0 / d.sin() - 1.0 / d
                };
                FRAC_PI_2 * (near - 1.0 / (PI - d))
            }
            ProfileKind::PiecewiseLinear => {
                if s <= FRAC_PI_2 {
                    -FRAC_PI_2 / (PI - s)
                } else {
                    -FRAC_PI_2 / s
                }
            }
            ProfileKind::Tabulated(t) => {
                let q = t.q_at(s);
                let mut r = (1.0 / q - PI * PI / 2.0) / (s * (PI - s));
                if !r.is_finite() {
                    // Removable singularity at the ends; use a one-sided limit.
                    let h = 1e-6;
                    let s2 = if s < FRAC_PI_2 { s + h } else { s - h };
                    r = (1.0 / t.q_at(s2) - PI * PI / 2.0) / (s2 * (PI - s2));
                }
                r
            }
        }
    }
}

fn check_period(x: f64) -> Result<()> {
    if !(-PI..=PI).contains(&x) {
        return Err(Error::domain("x", x, "[-pi, pi]"));
    }
    Ok(())
}

/// The problem `L u = iε(f u')' + i u'` with periodic boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    profile: CoefficientProfile,
    epsilon: f64,
}

impl OperatorModel {
    pub fn new(profile: CoefficientProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < PI) {
            return Err(Error::domain("epsilon", epsilon, "(0, pi)"));
        }
        Ok(Self { profile, epsilon })
    }

    pub fn profile(&self) -> &CoefficientProfile {
        &self.profile
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The constant `c = π/2`.
    pub fn c(&self) -> f64 {
        C
    }

    /// Local exponent `c/ε`.
    pub fn sigma(&self) -> f64 {
        C / self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub profile: String,
    pub samples: usize,
    pub tolerance: f64,
    /// `max |f(x + π) + f(x)|` over `x ∈ [-π, 0]`.
    pub antiperiodicity: f64,
    /// `max |f(-x) + f(x)|` over `x ∈ [0, π]`.
    pub oddness: f64,
    /// `max(0, -min f)` over interior points of `(0, π)`.
    pub positivity: f64,
    /// Number of interior points with `f ≤ 0`.
    pub nonpositive_points: usize,
    /// `|f'(0) - 2/π|`.
    pub slope_error: f64,
    pub passed: bool,
}

/// Samples the symmetry, positivity and normalization hypotheses on `f`.
pub fn validate_profile(profile: &CoefficientProfile, samples: usize) -> Result<ValidationReport> {
    if samples < 16 {
        return Err(Error::domain("samples", samples as f64, "[16, inf)"));
    }
    let tol = profile.tolerance();
    let grid: Vec<f64> = (0..=samples).map(|k| PI * k as f64 / samples as f64).collect();

    let mut antiperiodicity: f64 = 0.0;
    let mut oddness: f64 = 0.0;
    for &x in &grid {
        let neg = x - PI;
        antiperiodicity = antiperiodicity.max((profile.value(neg + PI) + profile.value(neg)).abs());
        oddness = oddness.max((profile.value(-x) + profile.value(x)).abs());
    }

    let mut interior: Vec<f64> = grid[1..samples].to_vec();
    if let ProfileKind::Tabulated(t) = profile.kind() {
        let n = t.samples().len() - 1;
        interior.extend(t.nodes().skip(1).take(n - 1));
    }
    let mut positivity: f64 = 0.0;
    let mut nonpositive_points = 0;
    for &x in &interior {
        let v = profile.value(x);
        if v <= 0.0 {
            nonpositive_points += 1;
            positivity = positivity.max(-v);
        }
    }
    if let ProfileKind::Tabulated(t) = profile.kind() {
        for &v in &t.samples()[1..t.samples().len() - 1] {
            if v <= 0.0 {
                nonpositive_points += 1;
                positivity = positivity.max(-v);
            }
        }
    }

    let slope = match profile.kind() {
        ProfileKind::Tabulated(t) => t.data_slope(),
        _ => profile.derivative(0.0),
    };
    let slope_error = (slope - NORMALIZATION_SLOPE).abs();

    let passed = antiperiodicity <= tol
        && oddness <= tol
        && nonpositive_points == 0
        && slope_error <= tol.max(slope_tolerance(profile));
    Ok(ValidationReport {
        profile: profile.name().to_string(),
        samples,
        tolerance: tol,
        antiperiodicity,
        oddness,
        positivity,
        nonpositive_points,
        slope_error,
        passed,
    })
}

// A secant over the first table cell carries an O(h²) error for smooth f.
fn slope_tolerance(profile: &CoefficientProfile) -> f64 {
    match profile.kind() {
        ProfileKind::Tabulated(t) => TABULATED_TOLERANCE.max(t.step * t.step / 4.0),
        _ => MODEL_TOLERANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_values() {
        let f = CoefficientProfile::sine();
        assert!((f.eval(FRAC_PI_2).unwrap() - FRAC_2_PI).abs() < 1e-15);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert!((f.eval(-FRAC_PI_2).unwrap() + FRAC_2_PI).abs() < 1e-15);
        assert!(f.eval(3.2).is_err());
    }

    #[test]
    fn derivatives() {
        let s = CoefficientProfile::sine();
        assert!((s.eval_prime(0.0).unwrap() - FRAC_2_PI).abs() < 1e-15);
        assert!(s.eval_prime(FRAC_PI_2).unwrap().abs() < 1e-15);
        let pl = CoefficientProfile::piecewise_linear();
        assert_eq!(pl.eval_prime(PI / 4.0).unwrap(), FRAC_2_PI);
        match pl.eval_prime(FRAC_PI_2) {
            Err(Error::Kink(k)) => assert_eq!(k, FRAC_PI_2),
            other => panic!("expected kink error, got {other:?}"),
        }
    }

    #[test]
    fn closed_form_models_validate() {
        for f in [CoefficientProfile::sine(), CoefficientProfile::piecewise_linear()] {
            let r = validate_profile(&f, 256).unwrap();
            assert!(r.passed, "{r:?}");
            assert!(r.antiperiodicity < 1e-12 && r.oddness < 1e-12 && r.slope_error < 1e-12);
        }
    }

    #[test]
    fn negated_sample_flags_positivity() {
        let n = 314;
        let mut samples: Vec<f64> = (0..=n)
            .map(|k| FRAC_2_PI * (PI * k as f64 / n as f64).sin())
            .collect();
        samples[10] = -samples[10]; // x = 0.1
        let f = CoefficientProfile::tabulated(TabulatedProfile::from_samples(samples).unwrap());
        let r = validate_profile(&f, 256).unwrap();
        assert!(!r.passed);
        assert!(r.positivity > 0.0 && r.nonpositive_points > 0);
    }

    #[test]
    fn tabulated_sine_tracks_model() {
        let t = TabulatedProfile::sample(400, |x| FRAC_2_PI * x.sin()).unwrap();
        let f = CoefficientProfile::tabulated(t);
        let r = validate_profile(&f, 256).unwrap();
        assert!(r.passed, "{r:?}");
        for k in 1..50 {
            let x = -PI + 2.0 * PI * k as f64 / 50.0;
            assert!((f.value(x) - FRAC_2_PI * x.sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn asymmetric_table_fails_antiperiodicity() {
        let t = TabulatedProfile::sample(200, |x| FRAC_2_PI * x.sin() * (1.0 + 0.05 * x * (PI - x) * x))
            .unwrap();
        let r = validate_profile(&CoefficientProfile::tabulated(t), 64).unwrap();
        assert!(r.antiperiodicity > 1e-3);
        assert!(!r.passed);
    }

    #[test]
    fn parse_rejects_non_uniform_grid() {
        let text = "0 0\n0.5 0.3\n1.7 0.5\n2.5 0.3\n3.141592653589793 0\n";
        assert!(TabulatedProfile::parse(text).is_err());
        let good: String = (0..=8)
            .map(|k| {
                let x = PI * k as f64 / 8.0;
                format!("{x} {}\n", FRAC_2_PI * x.sin())
            })
            .collect();
        assert!(TabulatedProfile::parse(&good).is_ok());
    }

    #[test]
    fn epsilon_range() {
        assert!(OperatorModel::new(CoefficientProfile::sine(), 3.0).is_ok());
        assert!(OperatorModel::new(CoefficientProfile::sine(), 3.2).is_err());
        assert!(OperatorModel::new(CoefficientProfile::sine(), 0.0).is_err());
        let m = OperatorModel::new(CoefficientProfile::sine(), 1.0).unwrap();
        assert_eq!(m.c(), FRAC_PI_2);
        assert_eq!(m.sigma(), FRAC_PI_2);
    }

    #[test]
    fn remainder_is_bounded_and_matches_definition() {
        for f in [CoefficientProfile::sine(), CoefficientProfile::piecewise_linear()] {
            for k in 1..100 {
                let s = PI * k as f64 / 100.0;
                let direct = 1.0 / f.value(s) - FRAC_PI_2 * (1.0 / s + 1.0 / (PI - s));
                assert!((f.reciprocal_remainder(s) - direct).abs() < 1e-12);
            }
            assert!(f.reciprocal_remainder(0.0).is_finite());
            assert!(f.reciprocal_remainder(PI).is_finite());
        }
    }
}
