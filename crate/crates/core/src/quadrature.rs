//! Gauss–Kronrod quadrature and the graded trapezoid rules used by the kernel.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod evaluation; returns (integral, error estimate).
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration to an absolute tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol.max(1e-15 * val.abs()) || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    recurse(&f, a, b, tol, 40)
}

/// Map `t ∈ [0, 1] ↦ [0, 1]` with `g'(0) = g'(1) = 0` (grading exponent 2).
pub fn cubic_grading(t: f64) -> (f64, f64) {
    (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
}

/// Map with `g'` vanishing to second order at both ends.
pub fn quintic_grading(t: f64) -> (f64, f64) {
    let t2 = t * t;
    (
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
    )
}

/// Trapezoid nodes and weights on `[a, b]` after a grading map, `n` panels.
pub fn graded_trapezoid(
    a: f64,
    b: f64,
    n: usize,
    map: fn(f64) -> (f64, f64),
) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / n as f64;
    let len = b - a;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (g, dg) = map(k as f64 * h);
        nodes.push(a + len * g);
        let end = if k == 0 || k == n { 0.5 } else { 1.0 };
        weights.push(end * h * len * dg);
    }
    nodes[n] = b;
    (nodes, weights)
}

/// Symmetric grid over `[-π, π]` with `grid_size` intervals, graded toward
/// `0` and `±π` by the cubic map on each half. Weights vanish at `0, ±π`.
pub fn kernel_grid(grid_size: usize) -> (Vec<f64>, Vec<f64>) {
    let m = grid_size / 2;
    let (pos, wpos) = graded_trapezoid(0.0, PI, m, cubic_grading);
    let mut nodes = Vec::with_capacity(2 * m + 1);
    let mut weights = Vec::with_capacity(2 * m + 1);
    for k in (1..=m).rev() {
        nodes.push(-pos[k]);
        weights.push(wpos[k]);
    }
    nodes.extend_from_slice(&pos);
    weights.extend_from_slice(&wpos);
    (nodes, weights)
}
