//! Dormand–Prince 5(4) stepping for the complex first-order system
//! `y₁' = y₂/p`, `y₂' = -(iλ/ε)(p/f) y₁`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State = [Complex64; 2];

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub max_steps: usize,
    /// Largest allowed step as a fraction of the distance to the nearest singular point.
    pub endpoint_fraction: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (h * c);
        out[1] += k[1] * (h * c);
    }
    out
}

/// Integrates from `nodes[0]` (where the state is `y0`) through every node in
/// order and returns the state at each node. Nodes must be strictly monotone.
/// `distance(x)` is the distance to the nearest singular point; steps never
/// exceed `endpoint_fraction * distance(x)`.
pub fn integrate_through<F, D>(
    rhs: F,
    distance: D,
    nodes: &[f64],
    y0: State,
    ctl: &StepControl,
) -> Result<Vec<State>>
where
    F: Fn(f64, &State) -> State,
    D: Fn(f64) -> f64,
{
    let mut out = Vec::with_capacity(nodes.len());
    out.push(y0);
    if nodes.len() < 2 {
        return Ok(out);
    }
    let dir = (nodes[1] - nodes[0]).signum();
    let mut x = nodes[0];
    let mut y = y0;
    let mut k1 = rhs(x, &y);
    let mut peak = [y0[0].norm(), y0[1].norm()];
    let mut h = (ctl.endpoint_fraction * distance(x)).min((nodes[1] - nodes[0]).abs());
    let mut steps = 0usize;

    for &target in &nodes[1..] {
        while (target - x) * dir > 0.0 {
            steps += 1;
            if steps > ctl.max_steps {
                return Err(Error::TooManySteps(ctl.max_steps));
            }
            let cap = ctl.endpoint_fraction * distance(x);
            let remaining = (target - x).abs();
            let mut step = h.min(cap);
            let last = step >= remaining * (1.0 - 1e-12);
            if last {
                step = remaining;
            }
            if step < 1e-15 * x.abs().max(1e-300) {
                return Err(Error::StepUnderflow {
                    start: nodes[0],
                    reach: x,
                });
            }
            let hs = step * dir;

            let k2 = rhs(x + C2 * hs, &axpy(&y, &[(A21, &k1)], hs));
            let k3 = rhs(x + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
            let k4 = rhs(
                x + C4 * hs,
                &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs),
            );
            let k5 = rhs(
                x + C5 * hs,
                &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
            );
            let xn = if last { target } else { x + hs };
            let k6 = rhs(
                xn,
                &axpy(
                    &y,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    hs,
                ),
            );
            let yn = axpy(
                &y,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                hs,
            );
            let k7 = rhs(xn, &yn);

            let mut err: f64 = 0.0;
            for i in 0..2 {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                    * hs;
                let scale = ctl.rtol
                    * y[i]
                        .norm()
                        .max(yn[i].norm())
                        .max(1e-8 * peak[i])
                        .max(1e-300);
                err = err.max(e.norm() / scale);
            }

            if err <= 1.0 {
                x = xn;
                y = yn;
                k1 = k7;
                peak[0] = peak[0].max(y[0].norm());
                peak[1] = peak[1].max(y[1].norm());
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow.min(1.0));
                }
            } else {
                let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = step * shrink;
            }
        }
        out.push(y);
    }
    Ok(out)
}
