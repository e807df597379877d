//! Grid-refinement behaviour of the discretized resolvent.

use lper::green::{self, KernelGrid};
use lper::profiles::{CoefficientProfile, OperatorModel};
use lper::schatten::{self, KernelPart};
use lper::shooting::ShootingConfig;
use lper::singular::IntegratingFactor;
use num_complex::Complex64;

fn kernels(sizes: &[usize]) -> Vec<KernelGrid> {
    let factor = IntegratingFactor::new(&OperatorModel::new(CoefficientProfile::sine(), 1.0).unwrap());
    let cfg = ShootingConfig::default();
    sizes
        .iter()
        .map(|&n| green::assemble_kernel(&factor, Complex64::i(), n, &cfg).unwrap())
        .collect()
}

fn top_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .take(10)
        .map(|(x, y)| (x - y).abs() / y)
        .fold(0.0, f64::max)
}

#[test]
fn singular_values_converge_at_second_order() {
    let ks = kernels(&[128, 256, 512]);
    let s: Vec<Vec<f64>> = ks
        .iter()
        .map(|k| schatten::singular_values(k, KernelPart::Total).unwrap().values)
        .collect();
    let d1 = top_delta(&s[0], &s[1]);
    let d2 = top_delta(&s[1], &s[2]);
    let rate = (d1 / d2).log2();
    assert!(d2 < 2e-3, "delta {d2:e}");
    assert!(rate > 1.7, "rate {rate}");
}

#[test]
fn origin_flux_limits_agree_under_refinement() {
    let ks = kernels(&[256, 512, 1024]);
    let gaps: Vec<f64> = ks
        .iter()
        .map(|k| {
            let f = green::random_bandlimited(&k.nodes, 1, 5);
            let (left, right) = green::origin_flux_limits(k, &f).unwrap();
            (left - right).norm() / left.norm().max(right.norm()).max(1.0)
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-4, "{gaps:?}");
}

#[test]
fn integral_proxies_stay_bounded() {
    let ks = kernels(&[256, 512]);
    let proxies: Vec<(f64, f64)> = ks
        .iter()
        .map(|k| {
            let f = green::random_bandlimited(&k.nodes, 2, 3);
            (
                green::first_integral_proxy(k, &f).unwrap(),
                green::second_integral_proxy(k, &f).unwrap(),
            )
        })
        .collect();
    for (a, b) in [(proxies[0].0, proxies[1].0), (proxies[0].1, proxies[1].1)] {
        assert!(a.is_finite() && (a - b).abs() < 0.1 * b, "{proxies:?}");
    }
}
