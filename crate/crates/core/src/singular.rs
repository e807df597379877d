//! Integrating factor `p` with its endpoint singularities split off, and the
//! local Frobenius data used to start and finish the shooting integrations.
//!
//! `p` solves `p'/p = f'/f + 1/(εf)`. Writing
//! `1/f(s) = (π/2)(1/s + 1/(π - s)) + h(s)` with `h` bounded, one gets on `(0, π)`
//!
//! ```text
//! log(p/f)(x) = σ log(x / (π - x)) + H(x)/ε + log(π/2) + σ log π,   H(x) = ∫₀ˣ h
//! ```
//!
//! where `σ = c/ε`. The additive constant is the gauge `p(x)/x^{1+σ} → 1` as `x → 0⁺`.
//! On `(-π, 0)` the factor is continued as an even function, `p(-x) = p(x)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::OperatorModel;
use crate::quadrature;

const TABLE_CELLS: usize = 2048;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cutoff used when none is configured: `1e-4 (1 + |λ|)^{-1/2}`.
pub fn default_delta(lambda: Complex64) -> f64 {
    1e-4 / (1.0 + lambda.norm()).sqrt()
}

/// Base point for the direct quadrature of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureBase {
    Origin,
    Midpoint,
}

/// The integrating factor of a model, with `H` tabulated once as a cubic
/// Hermite table (values from Gauss–Kronrod, slopes from `h` itself).
#[derive(Debug, Clone)]
pub struct IntegratingFactor {
    model: OperatorModel,
    sigma: f64,
    step: f64,
    big_h: Vec<f64>,
    small_h: Vec<f64>,
    h_mid: f64,
    gauge: f64,
}

impl IntegratingFactor {
    pub fn new(model: &OperatorModel) -> Self {
        let profile = model.profile();
        let step = PI / TABLE_CELLS as f64;
        let small_h: Vec<f64> = (0..=TABLE_CELLS)
            .map(|k| profile.reciprocal_remainder(k as f64 * step))
            .collect();
        let mut big_h = Vec::with_capacity(TABLE_CELLS + 1);
        big_h.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_CELLS {
            let a = k as f64 * step;
            acc += quadrature::integrate(|s| profile.reciprocal_remainder(s), a, a + step, 1e-17);
            big_h.push(acc);
        }
        let h_mid = quadrature::integrate(|s| profile.reciprocal_remainder(s), 0.0, FRAC_PI_2, 1e-15);
        let sigma = model.sigma();
        Self {
            model: model.clone(),
            sigma,
            step,
            big_h,
            small_h,
            h_mid,
            gauge: FRAC_PI_2.ln() + sigma * PI.ln(),
        }
    }

    pub fn model(&self) -> &OperatorModel {
        &self.model
    }

    /// Exponent of `p` at the origin, `1 + c/ε`.
    pub fn origin_exponent(&self) -> f64 {
        1.0 + self.sigma
    }

    /// Exponent of `p` at `π`, `1 - c/ε`.
    pub fn pi_exponent(&self) -> f64 {
        1.0 - self.sigma
    }

    /// Tabulated `H(x)` for `x ∈ [0, π]`.
    pub fn regular_integral(&self, x: f64) -> f64 {
        let t = (x / self.step).clamp(0.0, TABLE_CELLS as f64);
        let k = (t.floor() as usize).min(TABLE_CELLS - 1);
        let u = t - k as f64;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.big_h[k]
            + (u3 - 2.0 * u2 + u) * self.step * self.small_h[k]
            + (-2.0 * u3 + 3.0 * u2) * self.big_h[k + 1]
            + (u3 - u2) * self.step * self.small_h[k + 1]
    }

    /// `H(x)` by adaptive quadrature from the chosen base point.
    pub fn regular_integral_by_quadrature(&self, x: f64, base: QuadratureBase) -> f64 {
        let h = |s| self.model.profile().reciprocal_remainder(s);
        match base {
            QuadratureBase::Origin => quadrature::integrate(h, 0.0, x, 1e-15),
            QuadratureBase::Midpoint => self.h_mid + quadrature::integrate(h, FRAC_PI_2, x, 1e-15),
        }
    }

    fn log_p_over_f_with(&self, x: f64, big_h: f64) -> f64 {
        self.sigma * (x / (PI - x)).ln() + big_h / self.model.epsilon() + self.gauge
    }

    /// `log p(x)` on `(0, π)`.
    pub fn log_p(&self, x: f64) -> Result<f64> {
        check_open(x)?;
        Ok(self.model.profile().value(x).ln() + self.log_p_over_f_unchecked(x))
    }

    /// `log p(x)` computed with a direct quadrature of `H` instead of the table.
    pub fn log_p_by_quadrature(&self, x: f64, base: QuadratureBase) -> Result<f64> {
        check_open(x)?;
        let big_h = self.regular_integral_by_quadrature(x, base);
        Ok(self.model.profile().value(x).ln() + self.log_p_over_f_with(x, big_h))
    }

    /// `log(p/f)(x)` on `(0, π)`.
    pub fn log_p_over_f(&self, x: f64) -> Result<f64> {
        check_open(x)?;
        Ok(self.log_p_over_f_unchecked(x))
    }

    pub fn p_over_f(&self, x: f64) -> Result<f64> {
        self.log_p_over_f(x).map(f64::exp)
    }

    pub(crate) fn log_p_over_f_unchecked(&self, x: f64) -> f64 {
        self.log_p_over_f_with(x, self.regular_integral(x))
    }

    /// `(p(x), (p/f)(x))` for `x ∈ (0, π)`, no range check.
    #[inline]
    pub(crate) fn coefficients(&self, x: f64) -> (f64, f64) {
        let pf = self.log_p_over_f_unchecked(x).exp();
        (self.model.profile().value(x) * pf, pf)
    }

    /// `lim_{d→0} (p/f)(π - d) d^σ`.
    pub fn pi_singular_constant(&self) -> f64 {
        (self.sigma * PI.ln() + self.regular_integral(PI) / self.model.epsilon() + self.gauge).exp()
    }

    /// `lim_{x→0} (p/f)(x) x^{-σ}`, equal to `π/2` in the chosen gauge.
    pub fn origin_singular_constant(&self) -> f64 {
        FRAC_PI_2
    }
}

fn check_open(x: f64) -> Result<()> {
    if !(x > 0.0 && x < PI) {
        return Err(Error::domain("x", x, "(0, pi)"));
    }
    Ok(())
}

/// A truncated local Frobenius series `d^ν Σ c_k d^k` in the distance `d` to a
/// singular point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSeries {
    pub exponent: f64,
    pub coefficients: Vec<Complex64>,
}

impl LocalSeries {
    pub fn value(&self, d: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coefficients.iter().rev() {
            acc = acc * d + c;
        }
        acc * d.powf(self.exponent)
    }

    /// Derivative with respect to the distance `d`.
    pub fn derivative(&self, d: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coefficients.iter().enumerate() {
            acc += c * (self.exponent + k as f64) * d.powi(k as i32);
        }
        acc * d.powf(self.exponent - 1.0)
    }
}

// Terms beyond second order depend on f'''(0); only the local linear model
// is resolved, so the series stop at d². A vanishing divisor marks a
// resonant (logarithmic) case, where the series is cut before that term.
const SERIES_ORDER: usize = 2;

fn series(exponent: f64, lambda: Complex64, divisor: impl Fn(usize) -> f64) -> LocalSeries {
    let mut coefficients = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=SERIES_ORDER {
        let den = divisor(k);
        if den.abs() < 1e-6 {
            break;
        }
        let prev = coefficients[k - 1];
        coefficients.push(lambda * prev / (I * den));
    }
    LocalSeries {
        exponent,
        coefficients,
    }
}

/// Regular solution at the origin, `1 + a₁x + a₂x²`.
pub fn origin_regular_series(epsilon: f64, lambda: Complex64) -> LocalSeries {
    let r = 2.0 * epsilon / PI;
    series(0.0, lambda, |k| k as f64 * (r * k as f64 + 1.0))
}

/// Singular solution at the origin, `x^{-σ}(1 + …)`.
pub fn origin_singular_series(epsilon: f64, lambda: Complex64) -> LocalSeries {
    let r = 2.0 * epsilon / PI;
    let sigma = FRAC_PI_2 / epsilon;
    series(-sigma, lambda, |k| (k as f64 - sigma) * r * k as f64)
}

/// Regular solution at `π`, `1 + r₁d + r₂d²` with `d = π - x`.
pub fn pi_regular_series(epsilon: f64, lambda: Complex64) -> LocalSeries {
    let r = 2.0 * epsilon / PI;
    series(0.0, lambda, |k| k as f64 * (r * k as f64 - 1.0))
}

/// Vanishing solution at `π`, `d^σ(1 + b₁d + b₂d²)`.
pub fn pi_vanishing_series(epsilon: f64, lambda: Complex64) -> LocalSeries {
    let r = 2.0 * epsilon / PI;
    let sigma = FRAC_PI_2 / epsilon;
    series(sigma, lambda, |k| (sigma + k as f64) * r * k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    Origin,
    PlusPi,
    MinusPi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedBranch {
    Regular,
    Singular,
}

/// Initial data `(u, p u')` at a cutoff distance `δ` from a singular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointSeed {
    pub endpoint: Endpoint,
    pub branch: SeedBranch,
    pub delta: f64,
    pub value: Complex64,
    pub quasi_derivative: Complex64,
}

impl EndpointSeed {
    /// Abscissa of the seed.
    pub fn position(&self) -> f64 {
        match self.endpoint {
            Endpoint::Origin => self.delta,
            Endpoint::PlusPi => PI - self.delta,
            Endpoint::MinusPi => -PI + self.delta,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::domain("delta", delta, "(0, 0.1]"));
    }
    Ok(())
}

/// Seed for `φ`: the solution tending to `1` at the origin.
pub fn seed_regular_origin(
    factor: &IntegratingFactor,
    lambda: Complex64,
    delta: f64,
) -> Result<EndpointSeed> {
    check_delta(delta)?;
    let s = origin_regular_series(factor.model().epsilon(), lambda);
    let (p, _) = factor.coefficients(delta);
    Ok(EndpointSeed {
        endpoint: Endpoint::Origin,
        branch: SeedBranch::Regular,
        delta,
        value: s.value(delta),
        quasi_derivative: s.derivative(delta) * p,
    })
}

/// Seed for the unnormalized `ψ`: the solution vanishing like `(π - x)^σ` at `π`.
pub fn seed_vanishing_at_pi(
    factor: &IntegratingFactor,
    lambda: Complex64,
    delta: f64,
) -> Result<EndpointSeed> {
    check_delta(delta)?;
    let s = pi_vanishing_series(factor.model().epsilon(), lambda);
    let (p, _) = factor.coefficients(PI - delta);
    // d/dx = -d/dd
    Ok(EndpointSeed {
        endpoint: Endpoint::PlusPi,
        branch: SeedBranch::Singular,
        delta,
        value: s.value(delta),
        quasi_derivative: -s.derivative(delta) * p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::CoefficientProfile;

    fn sine(eps: f64) -> IntegratingFactor {
        IntegratingFactor::new(&OperatorModel::new(CoefficientProfile::sine(), eps).unwrap())
    }

    fn linear(eps: f64) -> IntegratingFactor {
        IntegratingFactor::new(
            &OperatorModel::new(CoefficientProfile::piecewise_linear(), eps).unwrap(),
        )
    }

    #[test]
    fn linear_model_has_pure_power_factor() {
        let pf = linear(1.0);
        let s = pf.sigma;
        for &x in &[1e-5, 1e-3, 0.1, 0.7, 1.5] {
            let want = (1.0 + s) * f64::ln(x);
            assert!((pf.log_p(x).unwrap() - want).abs() < 1e-12, "x = {x}");
            let ratio = pf.p_over_f(x).unwrap() / (FRAC_PI_2 * x.powf(s));
            assert!((ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_residual_of_defining_equation() {
        for pf in [sine(1.0), sine(0.4), linear(2.0)] {
            let f = pf.model().profile().clone();
            let eps = pf.model().epsilon();
            for k in 1..=100 {
                let x = PI * k as f64 / 101.0;
                if f.kinks().iter().any(|&c| (x - c).abs() < 1e-2) {
                    continue;
                }
                let h = 1e-5 * x.min(PI - x);
                let fd = (pf.log_p(x + h).unwrap() - pf.log_p(x - h).unwrap()) / (2.0 * h);
                let rhs = f.derivative(x) / f.value(x) + 1.0 / (eps * f.value(x));
                assert!((fd - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "x = {x}: {fd} vs {rhs}");
            }
        }
    }

    #[test]
    fn gauge_is_consistent_between_base_points() {
        let pf = sine(1.0);
        for k in 1..40 {
            let x = PI * k as f64 / 40.0;
            let a = pf.log_p_by_quadrature(x, QuadratureBase::Origin).unwrap();
            let b = pf.log_p_by_quadrature(x, QuadratureBase::Midpoint).unwrap();
            let t = pf.log_p(x).unwrap();
            assert!((a - b).abs() < 1e-10);
            assert!((a - t).abs() < 1e-10);
        }
    }

    #[test]
    fn domain_errors() {
        let pf = sine(1.0);
        assert!(pf.log_p(0.0).is_err());
        assert!(pf.log_p(PI).is_err());
        assert!(pf.p_over_f(-0.5).is_err());
    }

    #[test]
    fn regular_seed_at_zero_lambda_is_exact() {
        let pf = sine(1.0);
        let s = seed_regular_origin(&pf, Complex64::new(0.0, 0.0), 1e-4).unwrap();
        assert_eq!(s.value, Complex64::new(1.0, 0.0));
        assert_eq!(s.quasi_derivative, Complex64::new(0.0, 0.0));
        assert!(seed_regular_origin(&pf, Complex64::new(1.0, 0.0), 0.2).is_err());
    }

    #[test]
    fn regular_seed_quasi_derivative_matches_linear_model() {
        let pf = linear(1.0);
        let eps = 1.0;
        let sig = pf.sigma;
        let lam = Complex64::new(2.0, 0.5);
        let d = 1e-4;
        let s = seed_regular_origin(&pf, lam, d).unwrap();
        let want = -I * lam * FRAC_PI_2 / (eps * (1.0 + sig)) * d.powf(1.0 + sig);
        assert!(((s.quasi_derivative - want) / want).norm() < 1e-3);
    }

    #[test]
    fn regular_seed_deviation_halves() {
        let pf = sine(1.0);
        let lam = Complex64::new(3.0, 0.0);
        let mut prev = (seed_regular_origin(&pf, lam, 1e-2).unwrap().value - 1.0).norm();
        for k in 1..5 {
            let d = 1e-2 / 2f64.powi(k);
            let cur = (seed_regular_origin(&pf, lam, d).unwrap().value - 1.0).norm();
            let factor = prev / cur;
            assert!((factor - 2f64.powf(pf.sigma.min(1.0))).abs() < 0.05, "{factor}");
            prev = cur;
        }
    }

    #[test]
    fn vanishing_seed_power_law() {
        let pf = sine(1.0);
        let zero = Complex64::new(0.0, 0.0);
        let s = seed_vanishing_at_pi(&pf, zero, 1e-3).unwrap();
        assert!((s.value.re - 1e-3f64.powf(FRAC_PI_2)).abs() < 1e-18);
        assert!((s.value.re - 1.9e-5).abs() < 1e-6);
        let lam = Complex64::new(1.0, 0.0);
        let a = seed_vanishing_at_pi(&pf, lam, 1e-3).unwrap();
        let b = seed_vanishing_at_pi(&pf, lam, 5e-4).unwrap();
        let ratio = (b.value / a.value).norm();
        assert!((ratio - 2f64.powf(-pf.sigma)).abs() < 1e-3);
        // d/dx (π - x)^σ = -σ d^{σ-1}
        let (p, _) = pf.coefficients(PI - 1e-3);
        let want = -pf.sigma * 1e-3f64.powf(pf.sigma - 1.0) * p;
        assert!((s.quasi_derivative.re - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn seeds_commute_with_conjugation_and_reflection() {
        let pf = sine(1.0);
        let lam = Complex64::new(1.3, 0.4);
        // -conj(λ) gives the conjugate solution for a real profile.
        let a = seed_regular_origin(&pf, lam, 1e-4).unwrap();
        let b = seed_regular_origin(&pf, -lam.conj(), 1e-4).unwrap();
        assert_eq!(a.value.conj(), b.value);
        assert_eq!(a.quasi_derivative.conj(), b.quasi_derivative);
        let a = seed_vanishing_at_pi(&pf, lam, 1e-4).unwrap();
        let b = seed_vanishing_at_pi(&pf, -lam.conj(), 1e-4).unwrap();
        assert_eq!(a.value.conj(), b.value);
    }

    #[test]
    fn series_satisfy_local_recurrences() {
        // Apply iε(2/π)(d u_d)_d ± i u_d - λu term by term; everything cancels
        // except the truncation remainder -λ c₂ d^{ν+2}.
        let eps = 0.8;
        let lam = Complex64::new(1.7, -0.3);
        let check = |s: &LocalSeries, sign: f64| {
            let d: f64 = 1e-2;
            let nu = s.exponent;
            let mut op = Complex64::new(0.0, 0.0);
            for (k, c) in s.coefficients.iter().enumerate() {
                let e = nu + k as f64;
                op += (I * eps * (2.0 / PI) * e * e + sign * I * e) * c * d.powf(e - 1.0);
                op -= lam * c * d.powf(e);
            }
            let rem = -lam * s.coefficients[2] * d.powf(nu + 2.0);
            assert!((op - rem).norm() < 1e-12 * s.value(d).norm() / d, "{op} vs {rem}");
        };
        check(&origin_regular_series(eps, lam), 1.0);
        check(&origin_singular_series(eps, lam), 1.0);
        check(&pi_regular_series(eps, lam), -1.0);
        check(&pi_vanishing_series(eps, lam), -1.0);
    }
}
