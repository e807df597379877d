//! Green function of `L_per - λ` on a graded tensor grid over `[-π, π]²`.
//!
//! With `g = w F`, `w = -i p / (ε f)` and unit Wronskian, the bounded periodic
//! solution of `(L_per - λ) u = F` is
//!
//! ```text
//! u(x) = ψ(x) ∫₀ˣ φ g + φ(x) ∫ₓ^π ψ g + A φ(x),   A = ∫ ψ g / (φ(π)/φ(-π) - 1)
//! ```
//!
//! which splits as `G = G_I + G_II + G_III`:
//!
//! * `G_I(x, s) = sgn(x) ψ(x) φ(s) w(s)` for `s` between `0` and `x`,
//! * `G_II(x, s) = φ(x) ψ(s) w(s)` for `s ≥ x`,
//! * `G_III(x, s) = φ(x) ψ(s) w(s) / (φ(π)/φ(-π) - 1)` everywhere.
//!
//! Each part takes half its value on its own jump line `s = x`. Values at
//! `x < 0` come from traces at `-λ` through `φ_λ(-y) = φ_{-λ}(y)` and
//! `ψ_λ(-y) = -ψ_{-λ}(y)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::kernel_grid;
use crate::shooting::{self, ShootingConfig, SolutionTrace};
use crate::singular::{Endpoint, IntegratingFactor};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest admissible `|φ(π)/φ(-π) - 1|`.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-10;
/// Smallest grid accepted by [`assemble_kernel`] and [`resolvent_residual`].
pub const MIN_GRID: usize = 64;

/// Constants of the particular solution `A φ + B ψ` fixed by the boundary
/// conditions; `B` is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationConstants {
    pub a: Complex64,
    pub b: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Forcing,
    Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub role: Role,
}

impl GridFunction {
    pub fn forcing(nodes: &[f64], f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            nodes: nodes.to_vec(),
            values: nodes.iter().map(|&x| f(x)).collect(),
            role: Role::Forcing,
        }
    }

    /// `|u(-π) - u(π)|`.
    pub fn periodicity_defect(&self) -> f64 {
        (self.values[0] - self.values[self.values.len() - 1]).norm()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Per-node data for one grid point `x`.
#[derive(Debug, Clone, Copy)]
struct NodeData {
    phi: Complex64,
    /// `p φ'`.
    qphi: Complex64,
    /// `ψ w`, bounded on the whole period.
    psiw: Complex64,
    /// `p ψ'`.
    qpsi: Complex64,
    /// `log (p/f)(|x|)`; `-∞` at `0` and `+∞` at `±π`.
    ell: f64,
}

#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub lambda: Complex64,
    pub epsilon: f64,
    pub delta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub part1: DMatrix<Complex64>,
    pub part2: DMatrix<Complex64>,
    pub part3: DMatrix<Complex64>,
    /// `φ(π)/φ(-π) - 1`.
    pub denominator: Complex64,
    pub phi_plus: Complex64,
    pub phi_minus: Complex64,
    data: Vec<NodeData>,
}

impl KernelGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn total(&self) -> DMatrix<Complex64> {
        &self.part1 + &self.part2 + &self.part3
    }

    pub fn sup_norm(&self) -> f64 {
        let t = self.total();
        t.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `φ` at the nodes; the left factor of `G_III`.
    pub fn phi(&self) -> Vec<Complex64> {
        self.data.iter().map(|d| d.phi).collect()
    }

    /// `ψ w` at the nodes.
    pub fn psi_weighted(&self) -> Vec<Complex64> {
        self.data.iter().map(|d| d.psiw).collect()
    }

    /// Right factor of `G_III`, `ψ w / (φ(π)/φ(-π) - 1)`.
    pub fn part3_right(&self) -> Vec<Complex64> {
        self.data.iter().map(|d| d.psiw / self.denominator).collect()
    }

    /// `max |ψ(x) (p/f)(s)|` over grid pairs with `|s| ≤ |x|`.
    pub fn product_bound(&self) -> f64 {
        let eps = self.epsilon;
        self.data
            .iter()
            .map(|dx| {
                self.data
                    .iter()
                    .filter(|ds| ds.ell <= dx.ell)
                    .map(|ds| {
                        let r = if ds.ell == dx.ell { 1.0 } else { (ds.ell - dx.ell).exp() };
                        dx.psiw.norm() * eps * r
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Weighted `L²` norm on the grid.
    pub fn norm(&self, values: &[Complex64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.nodes.len() != self.nodes.len() {
            return Err(Error::GridMismatch {
                expected: self.nodes.len(),
                got: f.nodes.len(),
            });
        }
        Ok(())
    }
}

fn integration_nodes(kernel_pos: &[f64], delta: f64) -> Vec<f64> {
    let mut extra: Vec<f64> = kernel_pos.to_vec();
    let mut d = delta;
    while d < 0.2 {
        extra.push(d);
        extra.push(PI - d);
        d *= 1.5;
    }
    extra
}

struct HalfData {
    trace_phi: SolutionTrace,
    trace_psi: SolutionTrace,
    phi_pi: Complex64,
    psiw_pi: Complex64,
    psiw_origin: Complex64,
}

fn half(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: Vec<f64>,
    config: &ShootingConfig,
) -> Result<HalfData> {
    let eps = factor.model().epsilon();
    let phi = shooting::integrate_phi_on(factor, lambda, nodes, config)?;
    let psi = shooting::integrate_psi_normalized(factor, lambda, &phi, config)?;
    let phi_pi = shooting::extrapolate_endpoint(&phi, Endpoint::PlusPi, eps)?.regular;
    let psi_pi = shooting::extrapolate_endpoint(&psi, Endpoint::PlusPi, eps)?.singular;
    let psi_0 = shooting::extrapolate_endpoint(&psi, Endpoint::Origin, eps)?.singular;
    Ok(HalfData {
        trace_phi: phi,
        trace_psi: psi,
        phi_pi,
        psiw_pi: psi_pi * (-I / eps) * factor.pi_singular_constant(),
        psiw_origin: psi_0 * (-I / eps) * factor.origin_singular_constant(),
    })
}

/// `φ`, `ψ`, `φ w` and `ψ w` sampled at points of `(-π, 0) ∪ (0, π)`.
#[derive(Debug, Clone)]
pub struct FactorSamples {
    pub nodes: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    pub phi_weighted: Vec<Complex64>,
    pub psi_weighted: Vec<Complex64>,
}

pub fn sample_factors(
    factor: &IntegratingFactor,
    lambda: Complex64,
    xs: &[f64],
    config: &ShootingConfig,
) -> Result<FactorSamples> {
    let mut pos: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    if pos.iter().any(|&y| !(y > 0.0 && y < PI)) {
        return Err(Error::domain("sample point", 0.0, "(-pi, 0) or (0, pi)"));
    }
    pos.sort_by(f64::total_cmp);
    let delta = config.delta_for(lambda).min(pos[0] / 4.0);
    let edge = (PI - pos[pos.len() - 1]) / 4.0;
    let delta = delta.min(edge);
    let kinks = factor.model().profile().interior_kinks();
    let trace_nodes = shooting::nodes_with(&integration_nodes(&pos, delta), delta, &kinks);
    let (plus, minus) = rayon::join(
        || half(factor, lambda, trace_nodes.clone(), config),
        || half(factor, -lambda, trace_nodes.clone(), config),
    );
    let (plus, minus) = (plus?, minus?);
    let eps = factor.model().epsilon();
    let mut out = FactorSamples {
        nodes: xs.to_vec(),
        phi: Vec::with_capacity(xs.len()),
        psi: Vec::with_capacity(xs.len()),
        phi_weighted: Vec::with_capacity(xs.len()),
        psi_weighted: Vec::with_capacity(xs.len()),
    };
    for &x in xs {
        let (h, sgn) = if x < 0.0 { (&minus, -1.0) } else { (&plus, 1.0) };
        let t = h.trace_phi.nearest(x.abs());
        let w = sgn * (-I / eps) * factor.log_p_over_f_unchecked(x.abs()).exp();
        let phi = h.trace_phi.values[t];
        let psi = sgn * h.trace_psi.values[t];
        out.phi.push(phi);
        out.psi.push(psi);
        out.phi_weighted.push(phi * w);
        out.psi_weighted.push(psi * w);
    }
    Ok(out)
}

/// Assemble the three kernel parts at `λ` on `kernel_grid(grid_size)`.
pub fn assemble_kernel(
    factor: &IntegratingFactor,
    lambda: Complex64,
    grid_size: usize,
    config: &ShootingConfig,
) -> Result<KernelGrid> {
    if grid_size < MIN_GRID || !grid_size.is_multiple_of(2) {
        return Err(Error::domain("grid_size", grid_size as f64, "even integers >= 64"));
    }
    let eps = factor.model().epsilon();
    let (nodes, weights) = kernel_grid(grid_size);
    let m = grid_size / 2;
    let pos: Vec<f64> = nodes[m + 1..grid_size].to_vec();
    let delta = config.delta_for(lambda).min(pos[0] / 4.0);
    let inner = integration_nodes(&pos, delta);
    let kinks = factor.model().profile().interior_kinks();
    let trace_nodes = shooting::nodes_with(&inner, delta, &kinks);

    let (plus, minus) = rayon::join(
        || half(factor, lambda, trace_nodes.clone(), config),
        || half(factor, -lambda, trace_nodes.clone(), config),
    );
    let (plus, minus) = (plus?, minus?);

    let denominator = plus.phi_pi / minus.phi_pi - 1.0;
    if !(denominator.norm() >= DENOMINATOR_THRESHOLD) {
        return Err(Error::SingularDenominator(denominator.norm()));
    }

    let mut data = Vec::with_capacity(nodes.len());
    for (k, &x) in nodes.iter().enumerate() {
        let y = x.abs();
        let d = if k == 0 || k == grid_size {
            let h = if x < 0.0 { &minus } else { &plus };
            NodeData {
                phi: h.phi_pi,
                qphi: ZERO,
                psiw: h.psiw_pi,
                qpsi: ZERO,
                ell: f64::INFINITY,
            }
        } else if k == m {
            NodeData {
                phi: Complex64::new(1.0, 0.0),
                qphi: ZERO,
                psiw: 0.5 * (plus.psiw_origin + minus.psiw_origin),
                qpsi: ZERO,
                ell: f64::NEG_INFINITY,
            }
        } else {
            let h = if x < 0.0 { &minus } else { &plus };
            let t = h.trace_phi.nearest(y);
            debug_assert!((h.trace_phi.nodes[t] - y).abs() < 1e-13);
            let ell = factor.log_p_over_f_unchecked(y);
            let w = -I / eps * ell.exp();
            let sgn = x.signum();
            NodeData {
                phi: h.trace_phi.values[t],
                qphi: sgn * h.trace_phi.quasi[t],
                psiw: h.trace_psi.values[t] * w,
                qpsi: h.trace_psi.quasi[t],
                ell,
            }
        };
        data.push(d);
    }

    let n = nodes.len();
    let rows: Vec<[Vec<Complex64>; 3]> = (0..n)
        .into_par_iter()
        .map(|i| kernel_row(&nodes, &data, denominator, i))
        .collect();
    let mut part1 = DMatrix::zeros(n, n);
    let mut part2 = DMatrix::zeros(n, n);
    let mut part3 = DMatrix::zeros(n, n);
    for (i, [r1, r2, r3]) in rows.into_iter().enumerate() {
        for j in 0..n {
            part1[(i, j)] = r1[j];
            part2[(i, j)] = r2[j];
            part3[(i, j)] = r3[j];
        }
    }

    Ok(KernelGrid {
        lambda,
        epsilon: eps,
        delta,
        nodes,
        weights,
        part1,
        part2,
        part3,
        denominator,
        phi_plus: plus.phi_pi,
        phi_minus: minus.phi_pi,
        data,
    })
}

/// `exp(ℓ(|s|) - ℓ(|x|))`, i.e. `(p/f)(s) / (p/f)(x)` for `s`, `x` on the same side.
fn ratio(ell_s: f64, ell_x: f64) -> f64 {
    if ell_s == ell_x {
        1.0
    } else {
        (ell_s - ell_x).exp()
    }
}

fn kernel_row(
    nodes: &[f64],
    data: &[NodeData],
    den: Complex64,
    i: usize,
) -> [Vec<Complex64>; 3] {
    let n = nodes.len();
    let x = nodes[i];
    let dx = &data[i];
    let mut r1 = vec![ZERO; n];
    let mut r2 = vec![ZERO; n];
    let mut r3 = vec![ZERO; n];
    for j in 0..n {
        let s = nodes[j];
        let ds = &data[j];
        let diag = if i == j { 0.5 } else { 1.0 };
        if s * x > 0.0 && s.abs() <= x.abs() && dx.ell.is_finite() {
            r1[j] = x.signum() * diag * ds.phi * dx.psiw * ratio(ds.ell, dx.ell);
        } else if s * x > 0.0 && i == j {
            // x = s = ±π: ψ vanishes but ψ w has a finite limit.
            r1[j] = x.signum() * 0.5 * ds.phi * dx.psiw;
        }
        if s >= x {
            r2[j] = diag * dx.phi * ds.psiw;
        }
        r3[j] = dx.phi * ds.psiw / den;
    }
    [r1, r2, r3]
}

/// `A` and `B` for a given forcing.
pub fn variation_constants(kernel: &KernelGrid, forcing: &GridFunction) -> Result<VariationConstants> {
    kernel.check(forcing)?;
    let s: Complex64 = kernel
        .data
        .iter()
        .zip(&kernel.weights)
        .zip(&forcing.values)
        .map(|((d, w), f)| d.psiw * *w * f)
        .sum();
    Ok(VariationConstants {
        a: s / kernel.denominator,
        b: ZERO,
    })
}

/// `u(x_i) = Σ_j G(x_i, s_j) w_j F(s_j)`.
pub fn apply_resolvent(kernel: &KernelGrid, forcing: &GridFunction) -> Result<GridFunction> {
    kernel.check(forcing)?;
    let wf: Vec<Complex64> = forcing
        .values
        .iter()
        .zip(&kernel.weights)
        .map(|(f, w)| f * *w)
        .collect();
    let total = kernel.total();
    let values = (0..kernel.len())
        .map(|i| (0..kernel.len()).map(|j| total[(i, j)] * wf[j]).sum())
        .collect();
    Ok(GridFunction {
        nodes: kernel.nodes.clone(),
        values,
        role: Role::Solution,
    })
}

/// `f u'` of the resolvent solution at the interior nodes, reconstructed from
/// the quasi-derivatives: `p u' = (p ψ') ∫₀ˣ φ g + (p φ') (∫ₓ^π ψ g + A)`.
/// Returns `(x, f u')` pairs, skipping `0` and `±π`.
pub fn flux(kernel: &KernelGrid, forcing: &GridFunction) -> Result<Vec<(f64, Complex64)>> {
    let a = variation_constants(kernel, forcing)?.a;
    let eps = kernel.epsilon;
    let n = kernel.len();
    let wf: Vec<Complex64> = forcing
        .values
        .iter()
        .zip(&kernel.weights)
        .map(|(f, w)| f * *w)
        .collect();
    let mut out = Vec::new();
    for i in 0..n {
        let x = kernel.nodes[i];
        let dx = &kernel.data[i];
        if !dx.ell.is_finite() {
            continue;
        }
        let mut first = ZERO;
        let mut second = a;
        for j in 0..n {
            let s = kernel.nodes[j];
            let ds = &kernel.data[j];
            let diag = if i == j { 0.5 } else { 1.0 };
            if s * x > 0.0 && s.abs() <= x.abs() {
                first += diag * ds.phi * (-I / eps) * ratio(ds.ell, dx.ell) * wf[j];
            }
            if s >= x {
                second += diag * ds.psiw * wf[j];
            }
        }
        let f_over_p = x.signum() * (-dx.ell).exp();
        out.push((x, x.signum() * dx.qpsi * first + f_over_p * dx.qphi * second));
    }
    Ok(out)
}

/// Limits of `f u'` at `0⁻` and `0⁺`, each by linear extrapolation from the two
/// nodes nearest the origin on that side.
pub fn origin_flux_limits(kernel: &KernelGrid, forcing: &GridFunction) -> Result<(Complex64, Complex64)> {
    let fl = flux(kernel, forcing)?;
    let k = fl.partition_point(|(x, _)| *x < 0.0);
    let extrapolate = |(x1, f1): (f64, Complex64), (x2, f2): (f64, Complex64)| {
        f1 - x1 * (f2 - f1) / (x2 - x1)
    };
    Ok((
        extrapolate(fl[k - 1], fl[k - 2]),
        extrapolate(fl[k], fl[k + 1]),
    ))
}

/// `max |ψ(x) ∫₀ˣ φ g| / (|x|^{1/2} ‖F‖)` over `x ∈ (0, π/2)`.
pub fn first_integral_proxy(kernel: &KernelGrid, forcing: &GridFunction) -> Result<f64> {
    kernel.check(forcing)?;
    let norm = kernel.norm(&forcing.values);
    Ok(row_sums(kernel, &kernel.part1, forcing)
        .filter(|(x, _)| *x > 0.0 && *x < FRAC_PI_2)
        .map(|(x, v)| v.norm() / (x.sqrt() * norm))
        .fold(0.0, f64::max))
}

/// `max |φ(x) ∫ₓ^π ψ g| / (|π - x|^{1/2} ‖F‖)` over `x ∈ (π/2, π)`.
pub fn second_integral_proxy(kernel: &KernelGrid, forcing: &GridFunction) -> Result<f64> {
    kernel.check(forcing)?;
    let norm = kernel.norm(&forcing.values);
    Ok(row_sums(kernel, &kernel.part2, forcing)
        .filter(|(x, _)| *x > FRAC_PI_2 && *x < PI)
        .map(|(x, v)| v.norm() / ((PI - x).sqrt() * norm))
        .fold(0.0, f64::max))
}

fn row_sums<'a>(
    kernel: &'a KernelGrid,
    part: &'a DMatrix<Complex64>,
    forcing: &'a GridFunction,
) -> impl Iterator<Item = (f64, Complex64)> + 'a {
    (0..kernel.len()).map(move |i| {
        let v = (0..kernel.len())
            .map(|j| part[(i, j)] * kernel.weights[j] * forcing.values[j])
            .sum();
        (kernel.nodes[i], v)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub relative: f64,
    pub collar: f64,
    pub nodes_used: usize,
}

/// Relative discrete `L²` norm of `(L_per - λ) u - F` by finite differences,
/// with `(f u')'` in flux form, skipping nodes within `collar` of `0, ±π`.
pub fn resolvent_residual(
    factor: &IntegratingFactor,
    lambda: Complex64,
    u: &GridFunction,
    forcing: &GridFunction,
    weights: &[f64],
    collar: f64,
) -> Result<Residual> {
    let n = u.nodes.len();
    if n < MIN_GRID {
        return Err(Error::domain("grid nodes", n as f64, ">= 64"));
    }
    if forcing.nodes.len() != n || weights.len() != n {
        return Err(Error::GridMismatch {
            expected: n,
            got: forcing.nodes.len().min(weights.len()),
        });
    }
    let profile = factor.model().profile();
    let eps = factor.model().epsilon();
    let x = &u.nodes;
    let v = &u.values;
    let (mut num, mut den, mut used) = (0.0, 0.0, 0);
    for k in 1..n - 1 {
        let d = x[k].abs().min(PI - x[k].abs());
        if d <= collar {
            continue;
        }
        let (hm, hp) = (x[k] - x[k - 1], x[k + 1] - x[k]);
        let fm = profile.value(0.5 * (x[k] + x[k - 1]));
        let fp = profile.value(0.5 * (x[k] + x[k + 1]));
        let flux_div = (fp * (v[k + 1] - v[k]) / hp - fm * (v[k] - v[k - 1]) / hm) / (0.5 * (hm + hp));
        let du = (v[k + 1] * hm * hm - v[k - 1] * hp * hp + v[k] * (hp * hp - hm * hm))
            / (hm * hp * (hm + hp));
        let r = I * eps * flux_div + I * du - lambda * v[k] - forcing.values[k];
        num += weights[k] * r.norm_sqr();
        den += weights[k] * forcing.values[k].norm_sqr();
        used += 1;
    }
    let relative = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(Residual {
        relative,
        collar,
        nodes_used: used,
    })
}

/// Forcing `F = iε(f u')' + i u' - λ u` for an analytic `u` given as
/// `(u, u', u'')`.
pub fn manufactured_forcing(
    factor: &IntegratingFactor,
    lambda: Complex64,
    nodes: &[f64],
    u: impl Fn(f64) -> [Complex64; 3],
) -> GridFunction {
    let profile = factor.model().profile();
    let eps = factor.model().epsilon();
    GridFunction::forcing(nodes, |x| {
        let [v, dv, d2v] = u(x);
        let flux_div = profile.derivative(x) * dv + profile.value(x) * d2v;
        I * eps * flux_div + I * dv - lambda * v
    })
}

/// Random trigonometric polynomial `Σ_{|k| ≤ kmax} c_k e^{ikx}` with
/// coefficients uniform in the unit square.
pub fn random_bandlimited(nodes: &[f64], seed: u64, kmax: i32) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(i32, Complex64)> = (-kmax..=kmax)
        .map(|k| (k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    GridFunction::forcing(nodes, |x| {
        coeffs
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, *k as f64 * x))
            .sum()
    })
}
