//! Real eigenvalues as zeros of `D(λ) = φ(π, λ) - φ(-π, λ)`.
//!
//! For real `λ` the reflection `φ(-π, λ) = φ(π, -λ)` and the conjugation
//! symmetry `φ(π, -λ) = conj φ(π, λ)` make `D(λ) = 2i Im φ(π, λ)` purely
//! imaginary, so `Im D` is a real secular function with sign changes at the
//! eigenvalues. The scan checks this instead of assuming it and records which
//! component carried the signal.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::shooting::{self, ShootingConfig, SolutionTrace};
use crate::singular::IntegratingFactor;

/// Largest tolerated `|D| / max(|φ(π)|, |φ(-π)|, 1)` for an accepted eigenvalue.
pub const STALE_THRESHOLD: f64 = 1e-6;
/// Largest tolerated size of the discarded component of `D`, relative to `|φ(±π)|`.
pub const INDICATOR_REALITY: f64 = 1e-10;
/// Two refined roots closer than this are merged and reported with multiplicity 2.
pub const COLLISION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionValue {
    pub lambda: f64,
    pub d: Complex64,
    pub phi_plus: Complex64,
    pub phi_minus: Complex64,
}

impl DispersionValue {
    fn scale(&self) -> f64 {
        self.phi_plus.norm().max(self.phi_minus.norm()).max(1.0)
    }

    /// `|D|` relative to the size of the two boundary values.
    pub fn relative(&self) -> f64 {
        self.d.norm() / self.scale()
    }
}

/// `D(λ)` for real `λ`.
pub fn dispersion(
    factor: &IntegratingFactor,
    lambda: f64,
    config: &ShootingConfig,
) -> Result<DispersionValue> {
    let plus = shooting::compute_phi_at_pi(factor, Complex64::new(lambda, 0.0), config)?;
    let minus = shooting::compute_phi_at_pi(factor, Complex64::new(-lambda, 0.0), config)?;
    Ok(DispersionValue {
        lambda,
        d: plus - minus,
        phi_plus: plus,
        phi_minus: minus,
    })
}

/// `D(λ)` for complex `λ`, used to audit the absence of non-real eigenvalues.
pub fn dispersion_complex(
    factor: &IntegratingFactor,
    lambda: Complex64,
    config: &ShootingConfig,
) -> Result<Complex64> {
    let plus = shooting::compute_phi_at_pi(factor, lambda, config)?;
    let minus = shooting::compute_phi_at_pi(factor, -lambda, config)?;
    Ok(plus - minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Re,
    Im,
}

impl Component {
    fn of(self, z: Complex64) -> f64 {
        match self {
            Component::Re => z.re,
            Component::Im => z.im,
        }
    }

    fn other(self) -> Self {
        match self {
            Component::Re => Component::Im,
            Component::Im => Component::Re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSettings {
    pub lambda_max: f64,
    pub resolution: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            lambda_max: 50.0,
            resolution: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub lambda: f64,
    /// `|D(λ)|` at the refined value.
    pub residual: f64,
    pub relative_residual: f64,
    pub bracket: (f64, f64),
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub lambda: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueList {
    pub profile: &'static str,
    pub epsilon: f64,
    pub settings: ScanSettings,
    pub component: Component,
    /// Largest relative size of the discarded component over the scan.
    pub indicator_imaginary_residue: f64,
    pub eigenvalues: Vec<Eigenvalue>,
    pub skipped: Vec<SkippedPoint>,
}

impl EigenvalueList {
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.lambda).collect()
    }

    pub fn positive(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|e| e.lambda)
            .filter(|&l| l > 0.0)
            .collect()
    }

    /// Least-squares slope of `log λ_n` against `log n` over the first
    /// `count` positive eigenvalues.
    pub fn growth_slope(&self, count: usize) -> Option<f64> {
        let pos = self.positive();
        let pts: Vec<(f64, f64)> = pos
            .iter()
            .take(count)
            .enumerate()
            .map(|(k, l)| (((k + 1) as f64).ln(), l.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// Largest `min_m |λ_n + λ_m|` over the list.
    pub fn symmetry_defect(&self) -> f64 {
        let v = self.values();
        v.iter()
            .map(|a| v.iter().map(|b| (a + b).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// Scan `{0, ±h, …, ±λ_max}` for sign changes of the root indicator and refine
/// each bracket by bisection to width `1e-10 (1 + |λ|)`.
pub fn scan_and_refine(
    factor: &IntegratingFactor,
    settings: ScanSettings,
    config: &ShootingConfig,
) -> Result<EigenvalueList> {
    let ScanSettings {
        lambda_max,
        resolution,
    } = settings;
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::domain("lambda_max", lambda_max, "(0, inf)"));
    }
    if !(resolution > 0.0 && resolution <= lambda_max) {
        return Err(Error::domain("resolution", resolution, "(0, lambda_max]"));
    }
    let n = (lambda_max / resolution).round() as i64;
    let grid: Vec<f64> = (-n..=n).map(|k| k as f64 * resolution).collect();
    let evaluated: Vec<Result<DispersionValue>> = grid
        .par_iter()
        .map(|&l| dispersion(factor, l, config))
        .collect();

    let mut good = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for (l, r) in grid.iter().zip(evaluated) {
        match r {
            Ok(v) => good.push(v),
            Err(e) => skipped.push(SkippedPoint {
                lambda: *l,
                error: e.to_string(),
            }),
        }
    }

    let weight = |c: Component| good.iter().map(|v| c.of(v.d).abs() / v.scale()).sum::<f64>();
    let component = if weight(Component::Im) >= weight(Component::Re) {
        Component::Im
    } else {
        Component::Re
    };
    let residue = good
        .iter()
        .map(|v| component.other().of(v.d).abs() / v.scale())
        .fold(0.0, f64::max);
    if residue > INDICATOR_REALITY {
        return Err(Error::ComplexIndicator(residue));
    }

    let zero_band = 0.5 * resolution;
    let mut roots = vec![Eigenvalue {
        lambda: 0.0,
        residual: dispersion(factor, 0.0, config)?.d.norm(),
        relative_residual: 0.0,
        bracket: (0.0, 0.0),
        multiplicity: 1,
    }];
    for pair in good.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ra, rb) = (component.of(a.d), component.of(b.d));
        if ra * rb >= 0.0 || (a.lambda.abs() < zero_band || b.lambda.abs() < zero_band) {
            continue;
        }
        roots.push(refine(factor, component, (a.lambda, ra), (b.lambda, rb), config)?);
    }
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut merged: Vec<Eigenvalue> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.lambda - last.lambda).abs() < COLLISION => last.multiplicity += 1,
            _ => merged.push(r),
        }
    }

    Ok(EigenvalueList {
        profile: factor.model().profile().name(),
        epsilon: factor.model().epsilon(),
        settings,
        component,
        indicator_imaginary_residue: residue,
        eigenvalues: merged,
        skipped,
    })
}

fn refine(
    factor: &IntegratingFactor,
    component: Component,
    (mut lo, mut rlo): (f64, f64),
    (mut hi, _): (f64, f64),
    config: &ShootingConfig,
) -> Result<Eigenvalue> {
    let bracket = (lo, hi);
    let mut last = None;
    while hi - lo > 1e-10 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = dispersion(factor, mid, config)?;
        let r = component.of(v.d);
        if r == 0.0 {
            lo = mid;
            hi = mid;
            last = Some(v);
            break;
        }
        if r * rlo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            rlo = r;
        }
        last = Some(v);
    }
    let lambda = 0.5 * (lo + hi);
    let v = match last {
        Some(v) if v.lambda == lambda => v,
        _ => dispersion(factor, lambda, config)?,
    };
    Ok(Eigenvalue {
        lambda,
        residual: v.d.norm(),
        relative_residual: v.relative(),
        bracket,
        multiplicity: 1,
    })
}

/// The `φ`-trace at an eigenvalue, scaled to unit maximum modulus.
pub fn eigenfunction(
    factor: &IntegratingFactor,
    lambda: f64,
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let v = dispersion(factor, lambda, config)?;
    if v.relative() > STALE_THRESHOLD {
        return Err(Error::StaleEigenvalue {
            lambda,
            residual: v.relative(),
            threshold: STALE_THRESHOLD,
        });
    }
    let trace = shooting::integrate_phi(factor, Complex64::new(lambda, 0.0), config)?;
    let peak = trace.max_modulus();
    let mut out = trace;
    for (u, q) in out.values.iter_mut().zip(out.quasi.iter_mut()) {
        *u /= peak;
        *q /= peak;
    }
    Ok(out)
}
