//! Singular values of the discretized resolvent, Schatten norms, the dyadic
//! block bound and the eigenvalue–Schatten inequality.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::Serialize;

use crate::eigensolve::EigenvalueList;
use crate::error::{Error, Result};
use crate::green::{self, KernelGrid};
use crate::quadrature::{graded_trapezoid, quintic_grading};
use crate::shooting::ShootingConfig;
use crate::singular::IntegratingFactor;

pub const DEFAULT_ORDERS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];
const SVD_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelPart {
    Total,
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchattenNorm {
    pub p: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularValueSpectrum {
    pub lambda: Complex64,
    pub grid_size: usize,
    pub part: KernelPart,
    /// Non-increasing.
    pub values: Vec<f64>,
    pub norms: Vec<SchattenNorm>,
    /// `(Σ_i Σ_j w_i w_j |G(x_i, s_j)|²)^{1/2}`, computed without the SVD.
    pub frobenius: f64,
}

impl SingularValueSpectrum {
    /// `(Σ α_j^p)^{1/p}`.
    pub fn norm(&self, p: f64) -> f64 {
        self.power_sum(p).powf(1.0 / p)
    }

    /// `Σ α_j^p`.
    pub fn power_sum(&self, p: f64) -> f64 {
        self.values.iter().map(|a| a.powf(p)).sum()
    }

    /// Share of `Σ α_j^p` carried by the last quarter of the spectrum.
    pub fn tail_fraction(&self, p: f64) -> f64 {
        let start = self.values.len() - self.values.len() / 4;
        let tail: f64 = self.values[start..].iter().map(|a| a.powf(p)).sum();
        tail / self.power_sum(p)
    }
}

fn part_matrix(kernel: &KernelGrid, part: KernelPart) -> DMatrix<Complex64> {
    match part {
        KernelPart::Total => kernel.total(),
        KernelPart::I => kernel.part1.clone(),
        KernelPart::II => kernel.part2.clone(),
        KernelPart::III => kernel.part3.clone(),
    }
}

/// Singular values of `D^{1/2} G D^{1/2}` with `D` the quadrature weights.
pub fn singular_values(kernel: &KernelGrid, part: KernelPart) -> Result<SingularValueSpectrum> {
    singular_values_with(kernel, part, &DEFAULT_ORDERS)
}

pub fn singular_values_with(
    kernel: &KernelGrid,
    part: KernelPart,
    orders: &[f64],
) -> Result<SingularValueSpectrum> {
    let sqrt_w: Vec<f64> = kernel.weights.iter().map(|w| w.sqrt()).collect();
    let mut m = part_matrix(kernel, part);
    let n = m.nrows();
    let mut frob = 0.0;
    for i in 0..n {
        for j in 0..n {
            frob += kernel.weights[i] * kernel.weights[j] * m[(i, j)].norm_sqr();
            m[(i, j)] *= sqrt_w[i] * sqrt_w[j];
        }
    }
    let svd = SVD::try_new(m, false, false, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or(Error::SvdNoConvergence(SVD_MAX_ITERATIONS))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let mut spectrum = SingularValueSpectrum {
        lambda: kernel.lambda,
        grid_size: kernel.grid_size(),
        part,
        values,
        norms: Vec::new(),
        frobenius: frob.sqrt(),
    };
    spectrum.norms = orders
        .iter()
        .map(|&p| SchattenNorm {
            p,
            norm: spectrum.norm(p),
        })
        .collect();
    Ok(spectrum)
}

/// One dyadic level: the block norms `‖a‖_{L²(I_left)} ‖b‖_{L²(I_right)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicLevel {
    pub level: usize,
    pub blocks: Vec<f64>,
    /// `α̂_j`, the largest block norm.
    pub max_block: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicDecomposition {
    pub levels: Vec<DyadicLevel>,
    /// `m = max_j 2^j α̂_j`.
    pub m: f64,
}

impl DyadicDecomposition {
    fn new(levels: Vec<DyadicLevel>) -> Self {
        let m = levels
            .iter()
            .map(|l| 2f64.powi(l.level as i32) * l.max_block)
            .fold(0.0, f64::max);
        Self { levels, m }
    }

    /// `α̂_{j+1} / α̂_j` for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| w[1].max_block / w[0].max_block)
            .collect()
    }

    /// True when `α̂_j ≤ (1 + slack) m / 2^j` at every level.
    pub fn bounded_by_m(&self, slack: f64) -> bool {
        self.levels
            .iter()
            .all(|l| l.max_block <= (1.0 + slack) * self.m / 2f64.powi(l.level as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicBoundReport {
    pub lambda: Complex64,
    pub panels_per_cell: usize,
    /// Blocks of `{x ≤ s}`: `v = φ` on `I_{2i,j}`, `ψ w` on `I_{2i+1,j}`, with
    /// `I_{i,j} = [iπ/2^j - π, (i+1)π/2^j - π]`.
    pub omega_two: DyadicDecomposition,
    /// Blocks of `{|s| ≤ |x|}` folded onto the triangles of `[0, π]` and
    /// `[-π, 0]`; the `ψ` interval never touches the origin.
    pub omega_one: DyadicDecomposition,
}

/// Squared `L²` norms of `values` on each of `cells` equal cells of `[-π, π]`,
/// where each cell carries `k` quadrature panels.
fn cell_norms(values: &[Complex64], weights: &[f64], cells: usize, k: usize) -> Vec<f64> {
    (0..cells)
        .map(|c| {
            (c * (k - 1)..(c + 1) * (k - 1))
                .map(|i| weights[i] * values[i].norm_sqr())
                .sum()
        })
        .collect()
}

/// Sum of consecutive runs of `len` cells starting at cell `start`.
fn merged(cells: &[f64], start: usize, len: usize) -> f64 {
    cells[start..start + len].iter().sum::<f64>().sqrt()
}

/// Dyadic block norms of the `G_II` factorization for levels `0..=levels`,
/// and of the folded `G_I` support, computed with a quintic-graded trapezoid of
/// `panels` panels on every finest cell.
pub fn dyadic_bound_audit(
    factor: &IntegratingFactor,
    lambda: Complex64,
    levels: usize,
    panels: usize,
    config: &ShootingConfig,
) -> Result<DyadicBoundReport> {
    if levels > 8 {
        return Err(Error::domain("levels", levels as f64, "0..=8"));
    }
    if panels < 2 {
        return Err(Error::domain("panels", panels as f64, ">= 2"));
    }
    // Finest cells have length π / 2^{levels+1}: the Ω_I fold at level j splits a
    // half period into 2^{j+1} intervals.
    let cells = 1usize << (levels + 2);
    let len = 2.0 * PI / cells as f64;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for c in 0..cells {
        let a = -PI + c as f64 * len;
        let (nodes, weights) = graded_trapezoid(a, a + len, panels, quintic_grading);
        // End nodes carry zero weight.
        xs.extend_from_slice(&nodes[1..panels]);
        ws.extend_from_slice(&weights[1..panels]);
    }
    let k = panels;
    let samples = green::sample_factors(factor, lambda, &xs, config)?;
    let phi = cell_norms(&samples.phi, &ws, cells, k);
    let psi = cell_norms(&samples.psi, &ws, cells, k);
    let phiw = cell_norms(&samples.phi_weighted, &ws, cells, k);
    let psiw = cell_norms(&samples.psi_weighted, &ws, cells, k);

    let half = cells / 2;
    let mut two = Vec::new();
    let mut one = Vec::new();
    for j in 0..=levels {
        // Ω_II: 2^{j+1} intervals over [-π, π].
        let run = cells >> (j + 1);
        let blocks: Vec<f64> = (0..1usize << j)
            .map(|i| merged(&phi, 2 * i * run, run) * merged(&psiw, (2 * i + 1) * run, run))
            .collect();
        two.push(level(j, blocks));

        // Ω_I: 2^{j+1} intervals over each half period.
        let run = half >> (j + 1);
        let mut blocks = Vec::new();
        for i in 0..1usize << j {
            // [0, π]: s in the left child, x in the right one.
            let (l, r) = (half + 2 * i * run, half + (2 * i + 1) * run);
            blocks.push(merged(&phiw, l, run) * merged(&psi, r, run));
            // [-π, 0]: x in the left child, s in the right one.
            let (l, r) = (2 * i * run, (2 * i + 1) * run);
            blocks.push(merged(&psi, l, run) * merged(&phiw, r, run));
        }
        one.push(level(j, blocks));
    }
    Ok(DyadicBoundReport {
        lambda,
        panels_per_cell: panels,
        omega_two: DyadicDecomposition::new(two),
        omega_one: DyadicDecomposition::new(one),
    })
}

fn level(level: usize, blocks: Vec<f64>) -> DyadicLevel {
    let max_block = blocks.iter().copied().fold(0.0, f64::max);
    DyadicLevel {
        level,
        blocks,
        max_block,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lambda: Complex64,
    pub p: f64,
    /// `Σ_n |λ - λ_n|^{-p}` over the known eigenvalues, counted with multiplicity.
    pub left: f64,
    /// `Σ_j α_j^p`.
    pub right: f64,
    /// `right - left`.
    pub slack: f64,
    pub terms: usize,
    pub passed: bool,
}

/// Truncated `Σ |λ - λ_n|^{-p} ≤ ‖(λ - L_per)^{-1}‖_p^p`, accepted with a 5%
/// allowance on the discretized right side.
pub fn eigen_schatten_inequality(
    eigs: &EigenvalueList,
    spectrum: &SingularValueSpectrum,
    lambda: Complex64,
    p: f64,
) -> Result<InequalityReport> {
    if !(p > 1.0) {
        return Err(Error::domain("p", p, "(1, inf)"));
    }
    let left: f64 = eigs
        .eigenvalues
        .iter()
        .map(|e| e.multiplicity as f64 * (lambda - e.lambda).norm().powf(-p))
        .sum();
    let right = spectrum.power_sum(p);
    Ok(InequalityReport {
        lambda,
        p,
        left,
        right,
        slack: right - left,
        terms: eigs.eigenvalues.iter().map(|e| e.multiplicity).sum(),
        passed: left <= right * 1.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::assemble_kernel;
    use crate::profiles::{CoefficientProfile, OperatorModel};

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn sine() -> IntegratingFactor {
        IntegratingFactor::new(&OperatorModel::new(CoefficientProfile::sine(), 1.0).unwrap())
    }

    #[test]
    fn frobenius_identity_and_ordering() {
        let k = assemble_kernel(&sine(), I, 128, &ShootingConfig::default()).unwrap();
        let s = singular_values(&k, KernelPart::Total).unwrap();
        assert!(s.values.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
        assert!((s.norm(2.0) - s.frobenius).abs() < 1e-8 * s.frobenius);
    }

    #[test]
    fn part_three_has_rank_one() {
        let k = assemble_kernel(&sine(), I, 128, &ShootingConfig::default()).unwrap();
        let s = singular_values(&k, KernelPart::III).unwrap();
        assert!(s.values[1] < 1e-10 * s.values[0]);
        let expect = k.norm(&k.phi()) * k.norm(&k.part3_right());
        assert!((s.values[0] - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn level_zero_is_the_half_period_product() {
        let f = sine();
        let cfg = ShootingConfig::default();
        let r = dyadic_bound_audit(&f, I, 2, 64, &cfg).unwrap();
        // Independent: norms on (-π, 0) and (0, π) with a single graded rule each.
        let (xl, wl) = graded_trapezoid(-PI, 0.0, 256, quintic_grading);
        let (xr, wr) = graded_trapezoid(0.0, PI, 256, quintic_grading);
        let l = green::sample_factors(&f, I, &xl[1..256], &cfg).unwrap();
        let r2 = green::sample_factors(&f, I, &xr[1..256], &cfg).unwrap();
        let nl: f64 = l.phi.iter().zip(&wl[1..256]).map(|(v, w)| w * v.norm_sqr()).sum();
        let nr: f64 = r2.psi_weighted.iter().zip(&wr[1..256]).map(|(v, w)| w * v.norm_sqr()).sum();
        let want = (nl * nr).sqrt();
        let got = r.omega_two.levels[0].max_block;
        assert!((got - want).abs() < 1e-6 * want, "{got} {want}");
    }

    #[test]
    fn inequality_rejects_small_orders() {
        let k = assemble_kernel(&sine(), I, 64, &ShootingConfig::default()).unwrap();
        let s = singular_values(&k, KernelPart::Total).unwrap();
        let eigs = EigenvalueList {
            profile: "sine",
            epsilon: 1.0,
            settings: Default::default(),
            component: crate::eigensolve::Component::Im,
            indicator_imaginary_residue: 0.0,
            eigenvalues: vec![],
            skipped: vec![],
        };
        assert!(eigen_schatten_inequality(&eigs, &s, I, 1.0).is_err());
        let r = eigen_schatten_inequality(&eigs, &s, I, 2.0).unwrap();
        assert_eq!(r.left, 0.0);
        assert!(r.passed);
    }
}
