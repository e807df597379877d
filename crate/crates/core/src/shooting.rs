//! Fundamental solutions `φ` and `ψ` of `(p u')' + (iλ/ε)(p/f) u = 0` on the
//! half period `(0, π)`, carried as `(u, p u')`.
//!
//! `φ` starts from the regular branch at the origin and runs forward; `ψ` starts
//! from the branch vanishing at `π` and runs backward, then is rescaled so that the
//! Wronskian `(p ψ') φ - (p φ') ψ` equals one. Values on `(-π, 0)` are never
//! integrated: they follow from traces at `-λ` by reflection.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::singular::{
    self, default_delta, origin_regular_series, origin_singular_series, pi_regular_series,
    pi_vanishing_series, Endpoint, IntegratingFactor,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const GEOMETRIC_RATIO: f64 = 1.5;

/// Solver settings shared by every integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Cutoff distance from the singular points; `None` selects [`default_delta`].
    pub delta: Option<f64>,
    pub rtol: f64,
    pub endpoint_fraction: f64,
    pub max_steps: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            delta: None,
            rtol: 1e-12,
            endpoint_fraction: 0.25,
            max_steps: 2_000_000,
        }
    }
}

impl ShootingConfig {
    pub fn delta_for(&self, lambda: Complex64) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(lambda))
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            max_steps: self.max_steps,
            endpoint_fraction: self.endpoint_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Phi,
    PsiPrenorm,
    Psi,
}

/// A solution sampled on an ascending grid in `(0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub lambda: Complex64,
    pub branch: Branch,
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Quasi-derivatives `p u'`.
    pub quasi: Vec<Complex64>,
}

impl SolutionTrace {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&n| n < x);
        if k == 0 {
            0
        } else if k == self.nodes.len() || x - self.nodes[k - 1] < self.nodes[k] - x {
            k - 1
        } else {
            k
        }
    }

    fn scaled(mut self, factor: Complex64, branch: Branch) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self.quasi.iter_mut().for_each(|v| *v *= factor);
        self.branch = branch;
        self
    }
}

/// Regular and singular parts of a solution at a singular endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointValue {
    pub endpoint: Endpoint,
    /// Coefficient of the solution regular at the endpoint; the boundary value.
    pub regular: Complex64,
    /// Coefficient of the branch `d^{exponent}(1 + …)`.
    pub singular: Complex64,
    pub exponent: f64,
    /// Mismatch of the two-term model at a third node.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WronskianValue {
    pub value: Complex64,
    pub max_deviation: f64,
}

/// Default trace grid on `[δ, π - δ]`: geometric near both ends, uniform in the
/// middle, kinks included.
pub fn default_nodes(delta: f64, kinks: &[f64]) -> Vec<f64> {
    let mut nodes = Vec::new();
    let mut d = delta;
    while d < 0.2 {
        nodes.push(d);
        nodes.push(PI - d);
        d *= GEOMETRIC_RATIO;
    }
    let n = ((PI - 0.4) / 0.05).ceil() as usize;
    for k in 0..=n {
        nodes.push(0.2 + (PI - 0.4) * k as f64 / n as f64);
    }
    finish_nodes(nodes, delta, kinks)
}

/// `extra` nodes merged with the cutoff, kinks and the three endpoint-fit nodes.
pub fn nodes_with(extra: &[f64], delta: f64, kinks: &[f64]) -> Vec<f64> {
    let mut nodes: Vec<f64> = extra.to_vec();
    nodes.extend([delta, FRAC_PI_2]);
    finish_nodes(nodes, delta, kinks)
}

fn finish_nodes(mut nodes: Vec<f64>, delta: f64, kinks: &[f64]) -> Vec<f64> {
    let fit = [
        PI - delta * GEOMETRIC_RATIO * GEOMETRIC_RATIO,
        PI - delta * GEOMETRIC_RATIO,
        PI - delta,
    ];
    let lo = delta;
    let hi = fit[0];
    nodes.retain(|&x| x >= lo && x < hi);
    nodes.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    nodes.extend(fit);
    nodes
}

fn half_rhs<'a>(
    factor: &'a IntegratingFactor,
    lambda: Complex64,
) -> impl Fn(f64, &ode::State) -> ode::State + 'a {
    let coupling = -I * lambda / factor.model().epsilon();
    move |x, y| {
        let (p, pf) = factor.coefficients(x);
        [y[1] / p, coupling * pf * y[0]]
    }
}

fn distance(x: f64) -> f64 {
    let a = x.abs();
    a.min(PI - a)
}

fn run(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: &[f64],
    y0: ode::State,
    config: &ShootingConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let states = ode::integrate_through(
        half_rhs(factor, lambda),
        distance,
        nodes,
        y0,
        &config.step_control(),
    )?;
    Ok(states.into_iter().map(|s| (s[0], s[1])).unzip())
}

/// `φ(·, λ)` on the default grid.
pub fn integrate_phi(
    factor: &IntegratingFactor,
    lambda: Complex64,
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let delta = config.delta_for(lambda);
    let nodes = default_nodes(delta, &factor.model().profile().interior_kinks());
    integrate_phi_on(factor, lambda, nodes, config)
}

/// `φ(·, λ)` on a caller-supplied grid; the grid must start at the cutoff and
/// end with the endpoint-fit nodes (see [`nodes_with`]).
pub fn integrate_phi_on(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: Vec<f64>,
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let seed = singular::seed_regular_origin(factor, lambda, nodes[0])?;
    let (values, quasi) = run(
        factor,
        lambda,
        &nodes,
        [seed.value, seed.quasi_derivative],
        config,
    )?;
    Ok(SolutionTrace {
        lambda,
        branch: Branch::Phi,
        nodes,
        values,
        quasi,
    })
}

/// Boundary value from a two-term local fit `A·R(d) + B·S(d)` at the last two
/// nodes (endpoint `π`) or the first two nodes (endpoint `0`); `R` and `S` are the
/// local Frobenius solutions through second order.
pub fn extrapolate_endpoint(
    trace: &SolutionTrace,
    endpoint: Endpoint,
    epsilon: f64,
) -> Result<EndpointValue> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::IllConditionedFit { det: 0.0 });
    }
    let lambda = trace.lambda;
    let (regular, singular, idx, dist): (_, _, [usize; 3], fn(f64) -> f64) = match endpoint {
        Endpoint::PlusPi => (
            pi_regular_series(epsilon, lambda),
            pi_vanishing_series(epsilon, lambda),
            [n - 1, n - 2, n - 3],
            |x| PI - x,
        ),
        Endpoint::Origin => (
            origin_regular_series(epsilon, lambda),
            origin_singular_series(epsilon, lambda),
            [0, 1, 2],
            |x| x,
        ),
        Endpoint::MinusPi => {
            return Err(Error::domain("endpoint", -PI, "{0, pi} for half-period traces"))
        }
    };
    let d: Vec<f64> = idx.iter().map(|&k| dist(trace.nodes[k])).collect();
    if !(d[0] > 0.0 && d[1] > d[0] && d[1] <= 10.0 * d[0] && d[1] < 0.05) {
        return Err(Error::IllConditionedFit { det: 0.0 });
    }
    let (r0, s0) = (regular.value(d[0]), singular.value(d[0]));
    let (r1, s1) = (regular.value(d[1]), singular.value(d[1]));
    let det = r0 * s1 - r1 * s0;
    let scale = (r0.norm() * s1.norm()).max(r1.norm() * s0.norm());
    if det.norm() < 1e-8 * scale {
        return Err(Error::IllConditionedFit {
            det: det.norm() / scale,
        });
    }
    let (u0, u1) = (trace.values[idx[0]], trace.values[idx[1]]);
    let a = (u0 * s1 - u1 * s0) / det;
    let b = (r0 * u1 - r1 * u0) / det;
    let u2 = trace.values[idx[2]];
    let residual = (u2 - a * regular.value(d[2]) - b * singular.value(d[2])).norm();
    Ok(EndpointValue {
        endpoint,
        regular: a,
        singular: b,
        exponent: singular.exponent,
        residual,
    })
}

/// Minimal grid for boundary values only.
fn boundary_nodes(factor: &IntegratingFactor, delta: f64) -> Vec<f64> {
    nodes_with(&[], delta, &factor.model().profile().interior_kinks())
}

/// `φ(π, λ)`. `φ(-π, λ)` is `phi_at_pi(-λ)` by reflection.
pub fn compute_phi_at_pi(
    factor: &IntegratingFactor,
    lambda: Complex64,
    config: &ShootingConfig,
) -> Result<Complex64> {
    let delta = config.delta_for(lambda);
    let trace = integrate_phi_on(factor, lambda, boundary_nodes(factor, delta), config)?;
    Ok(extrapolate_endpoint(&trace, Endpoint::PlusPi, factor.model().epsilon())?.regular)
}

/// `p(ψ'φ - φ'ψ)` at every node.
pub fn wronskian_profile(phi: &SolutionTrace, psi: &SolutionTrace) -> Vec<Complex64> {
    phi.values
        .iter()
        .zip(&phi.quasi)
        .zip(psi.values.iter().zip(&psi.quasi))
        .map(|((f, qf), (g, qg))| qg * f - qf * g)
        .collect()
}

pub fn wronskian(phi: &SolutionTrace, psi: &SolutionTrace) -> WronskianValue {
    let w = wronskian_profile(phi, psi);
    let value = w[phi.nearest(FRAC_PI_2)];
    let max_deviation = w.iter().map(|v| (v - value).norm()).fold(0.0, f64::max);
    WronskianValue {
        value,
        max_deviation,
    }
}

/// `ψ(·, λ)` on the grid of `phi`, normalized to unit Wronskian against `phi`.
pub fn integrate_psi_normalized(
    factor: &IntegratingFactor,
    lambda: Complex64,
    phi: &SolutionTrace,
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let raw = integrate_psi_prenorm(factor, lambda, &phi.nodes, config)?;
    let w = wronskian_profile(phi, &raw);
    let mid = phi.nearest(FRAC_PI_2);
    let w0 = w[mid];
    let scale = phi
        .values
        .iter()
        .zip(&raw.quasi)
        .map(|(f, q)| f.norm() * q.norm())
        .fold(0.0, f64::max);
    let threshold = 1e-8 * scale;
    if !(w0.norm() >= threshold) {
        return Err(Error::NearEigenvalue {
            re: lambda.re,
            im: lambda.im,
            wronskian: w0.norm(),
            threshold,
        });
    }
    Ok(raw.scaled(w0.inv(), Branch::Psi))
}

/// Unnormalized `ψ` integrated backward from `π - δ` where `δ = π - nodes.last()`.
pub fn integrate_psi_prenorm(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: &[f64],
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let delta = PI - nodes[nodes.len() - 1];
    let seed = singular::seed_vanishing_at_pi(factor, lambda, delta)?;
    let reversed: Vec<f64> = nodes.iter().rev().copied().collect();
    let (mut values, mut quasi) = run(
        factor,
        lambda,
        &reversed,
        [seed.value, seed.quasi_derivative],
        config,
    )?;
    values.reverse();
    quasi.reverse();
    Ok(SolutionTrace {
        lambda,
        branch: Branch::PsiPrenorm,
        nodes: nodes.to_vec(),
        values,
        quasi,
    })
}

/// `φ(·, λ)` integrated directly on `(-π, 0)` from `-δ` toward `-π + δ`, using the
/// odd continuation of `f` and the even continuation of `p`. Returned nodes are the
/// negated `nodes`, in the order given. Used to audit the reflection identity
/// `φ(-x, λ) = φ(x, -λ)`.
pub fn integrate_phi_mirrored(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: &[f64],
    config: &ShootingConfig,
) -> Result<SolutionTrace> {
    let profile = factor.model().profile().clone();
    let eps = factor.model().epsilon();
    let neg: Vec<f64> = nodes.iter().map(|x| -x).collect();
    let series = origin_regular_series(eps, lambda);
    let x0 = neg[0];
    let a1 = series.coefficients.get(1).copied().unwrap_or_default();
    let a2 = series.coefficients.get(2).copied().unwrap_or_default();
    let value = 1.0 + a1 * x0 + a2 * x0 * x0;
    let (p0, _) = factor.coefficients(-x0);
    let quasi0 = p0 * (a1 + 2.0 * a2 * x0);
    let coupling = -I * lambda / eps;
    let rhs = |x: f64, y: &ode::State| {
        let (p, _) = factor.coefficients(-x);
        let pf = p / profile.value(x);
        [y[1] / p, coupling * pf * y[0]]
    };
    let states = ode::integrate_through(rhs, distance, &neg, [value, quasi0], &config.step_control())?;
    let (values, quasi) = states.into_iter().map(|s| (s[0], s[1])).unzip();
    Ok(SolutionTrace {
        lambda,
        branch: Branch::Phi,
        nodes: neg,
        values,
        quasi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{CoefficientProfile, OperatorModel};

    fn factor(profile: CoefficientProfile, eps: f64) -> IntegratingFactor {
        IntegratingFactor::new(&OperatorModel::new(profile, eps).unwrap())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_at_zero_lambda_is_constant() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let t = integrate_phi(&pf, c(0.0, 0.0), &ShootingConfig::default()).unwrap();
        assert!(t.values.iter().all(|v| *v == c(1.0, 0.0)));
        assert!(t.quasi.iter().all(|v| *v == c(0.0, 0.0)));
        let a = compute_phi_at_pi(&pf, c(0.0, 0.0), &ShootingConfig::default()).unwrap();
        assert_eq!(a, c(1.0, 0.0));
    }

    #[test]
    fn extrapolation_of_exact_local_solutions() {
        let eps = 1.0;
        let sigma = FRAC_PI_2 / eps;
        let delta = 1e-4;
        let nodes = nodes_with(&[0.5, 1.0, 2.0], delta, &[]);
        let synth = |u: &dyn Fn(f64) -> f64| SolutionTrace {
            lambda: c(0.0, 0.0),
            branch: Branch::Phi,
            values: nodes.iter().map(|&x| c(u(x), 0.0)).collect(),
            quasi: vec![c(0.0, 0.0); nodes.len()],
            nodes: nodes.clone(),
        };
        let e = extrapolate_endpoint(&synth(&|_| 1.0), Endpoint::PlusPi, eps).unwrap();
        assert_eq!((e.regular, e.singular), (c(1.0, 0.0), c(0.0, 0.0)));
        let e = extrapolate_endpoint(&synth(&|x| (PI - x).powf(sigma)), Endpoint::PlusPi, eps).unwrap();
        assert!(e.regular.norm() < 1e-10 && (e.singular - 1.0).norm() < 1e-10);
        assert!(e.residual < 1e-12);
    }

    #[test]
    fn phi_converges_under_tolerance_and_cutoff_refinement() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let lam = c(1.0, 0.0);
        let base = ShootingConfig::default().with_rtol(1e-10);
        let a = compute_phi_at_pi(&pf, lam, &base).unwrap();
        let b = compute_phi_at_pi(&pf, lam, &base.with_rtol(5e-11)).unwrap();
        assert!((a - b).norm() < 10.0 * 1e-10 * a.norm().max(1.0), "{a} {b}");
        let d = base.delta_for(lam);
        let a = compute_phi_at_pi(&pf, lam, &base.with_rtol(1e-12).with_delta(d)).unwrap();
        let b = compute_phi_at_pi(&pf, lam, &base.with_rtol(1e-12).with_delta(d / 2.0)).unwrap();
        assert!((a - b).norm() < 1e-6, "{a} {b}");
    }

    #[test]
    fn trace_satisfies_step_reintegration() {
        // Re-integrate each interval at 10x tighter tolerance from the stored state.
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let lam = c(1.0, 0.0);
        let cfg = ShootingConfig::default().with_rtol(1e-11);
        let t = integrate_phi(&pf, lam, &cfg).unwrap();
        let tight = cfg.with_rtol(1e-12).step_control();
        let mut worst: f64 = 0.0;
        for k in 0..t.len() - 1 {
            let nodes = [t.nodes[k], t.nodes[k + 1]];
            let y = ode::integrate_through(
                half_rhs(&pf, lam),
                distance,
                &nodes,
                [t.values[k], t.quasi[k]],
                &tight,
            )
            .unwrap();
            let scale = t.values[k + 1].norm().max(1.0);
            worst = worst.max((y[1][0] - t.values[k + 1]).norm() / scale);
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn conjugate_reflection_symmetry_is_exact() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let cfg = ShootingConfig::default();
        for lam in [c(2.5, 0.0), c(0.7, 0.3)] {
            let a = integrate_phi(&pf, lam, &cfg).unwrap();
            let b = integrate_phi(&pf, -lam.conj(), &cfg).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                assert!((u.conj() - v).norm() <= 1e-10 * u.norm().max(1.0));
            }
        }
    }

    #[test]
    fn wronskian_is_constant_and_psi_vanishes_at_pi() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let cfg = ShootingConfig::default();
        let lam = c(1.0, 0.0);
        let phi = integrate_phi(&pf, lam, &cfg).unwrap();
        let psi = integrate_psi_normalized(&pf, lam, &phi, &cfg).unwrap();
        let w = wronskian(&phi, &psi);
        assert!((w.value - 1.0).norm() < 1e-12);
        assert!(w.max_deviation < 1e-6, "{}", w.max_deviation);
        let e = extrapolate_endpoint(&psi, Endpoint::PlusPi, 1.0).unwrap();
        assert!(e.regular.norm() < 1e-8 * psi.max_modulus().max(1.0));
    }

    #[test]
    fn psi_blows_up_at_origin_with_exponent() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let cfg = ShootingConfig::default().with_delta(1e-6);
        let lam = c(1.0, 0.0);
        let phi = integrate_phi_on(&pf, lam, nodes_with(&[1e-4, 1e-3], 1e-6, &[]), &cfg).unwrap();
        let psi = integrate_psi_normalized(&pf, lam, &phi, &cfg).unwrap();
        let (a, b) = (psi.nearest(1e-4), psi.nearest(1e-3));
        let slope = (psi.values[b].norm() / psi.values[a].norm()).ln() / (1e-3f64 / 1e-4).ln();
        assert!((slope + pf.model().sigma()).abs() < 1e-2, "{slope}");
    }

    #[test]
    fn mirrored_integration_matches_reflection() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let cfg = ShootingConfig::default().with_delta(1e-5);
        let lam = c(1.7, 0.0);
        let direct = integrate_phi_on(&pf, -lam, default_nodes(1e-5, &[]), &cfg).unwrap();
        let mirrored = integrate_phi_mirrored(&pf, lam, &direct.nodes, &cfg).unwrap();
        for (u, v) in direct.values.iter().zip(&mirrored.values) {
            assert!((u - v).norm() < 1e-6 * u.norm().max(1.0), "{u} {v}");
        }
    }

    #[test]
    fn phi_finite_for_nonreal_lambda() {
        let pf = factor(CoefficientProfile::sine(), 1.0);
        let v = compute_phi_at_pi(&pf, c(0.0, 1.0), &ShootingConfig::default()).unwrap();
        assert!(v.norm().is_finite());
    }
}
