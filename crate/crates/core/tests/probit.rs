use std::f64::consts::PI;

use eop_core::probit::*;

fn cdf(z: f64) -> f64 {
    std_normal_cdf(z).unwrap()
}

fn log_cdf(z: f64) -> f64 {
    log_std_normal_cdf(z).unwrap()
}

fn inv_mills(z: f64) -> f64 {
    inverse_mills(z).unwrap()
}

/// Composite Simpson integration of φ over [a, b].
fn simpson_pdf(a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut acc = std_normal_pdf(a) + std_normal_pdf(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * std_normal_pdf(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Lower-tail quadrature oracle: Φ(z) for z < 0 as ∫_{z−40}^{z} φ.
fn lower_tail_oracle(z: f64) -> f64 {
    simpson_pdf(z - 40.0, z, 200_000)
}

#[test]
fn cdf_at_zero_is_half() {
    assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
    assert_eq!(log_std_normal_cdf(0.0).unwrap(), 0.5f64.ln());
}

#[test]
fn cdf_matches_quadrature_at_975_quantile() {
    let oracle = 0.5 + simpson_pdf(0.0, 1.959964, 20_000);
    let got = std_normal_cdf(1.959964).unwrap();
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    assert!((got - 0.975).abs() < 1e-6);
}

#[test]
fn cdf_is_positive_deep_in_tail() {
    assert!(std_normal_cdf(-8.0).unwrap() > 0.0);
    assert!(std_normal_cdf(-37.0).unwrap() > 0.0);
}

#[test]
fn cdf_symmetry() {
    let mut z = -10.0;
    while z <= 10.0 {
        let lhs = std_normal_cdf(-z).unwrap();
        let rhs = 1.0 - std_normal_cdf(z).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15, "z={z}: {lhs} vs {rhs}");
        z += 0.01;
    }
}

#[test]
fn log_cdf_upper_tail_matches_asymptotic_series() {
    // Φ(−30) = φ(30)/30 · (1 − 1/z² + 3/z⁴ − 15/z⁶ + 105/z⁸)
    let z: f64 = 30.0;
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / z2.powi(2) - 15.0 / z2.powi(3) + 105.0 / z2.powi(4);
    let tail = std_normal_pdf(z) / z * series;
    let got = log_std_normal_cdf(30.0).unwrap();
    assert!((got - (-tail)).abs() <= 1e-12);
    assert!(got < 0.0);
}

#[test]
fn log_cdf_lower_tail_matches_quadrature() {
    for &z in &[-10.0, -20.0, -30.0, -3.0, -0.5] {
        let oracle = lower_tail_oracle(z).ln();
        let got = log_std_normal_cdf(z).unwrap();
        assert!(
            ((got - oracle) / oracle).abs() <= 1e-8,
            "z={z}: {got} vs {oracle}"
        );
    }
}

#[test]
fn log_cdf_relative_accuracy_on_grid() {
    // Quadrature oracle on the lower half, complement on the upper half.
    let mut z = -30.0;
    while z <= 30.0 {
        let oracle = if z < 0.0 {
            lower_tail_oracle(z).ln()
        } else {
            (-lower_tail_oracle(-z)).ln_1p()
        };
        let got = log_std_normal_cdf(z).unwrap();
        let rel = ((got - oracle) / oracle).abs();
        assert!(rel <= 1e-10, "z={z}: rel {rel}");
        z += 1.7;
    }
}

#[test]
fn log_cdf_tail_switch_is_continuous_and_increasing() {
    let below = log_cdf(ERFC_TAIL_LIMIT - 1e-9);
    let at = log_cdf(ERFC_TAIL_LIMIT);
    assert!(below < at);
    let expected_step = inv_mills(ERFC_TAIL_LIMIT) * 1e-9;
    assert!((at - below - expected_step).abs() < 1e-12 * at.abs());

    let mut prev = log_cdf(-60.0);
    let mut z = -60.0 + 0.05;
    while z <= 37.0 {
        let cur = log_cdf(z);
        assert!(cur.is_finite());
        assert!(cur > prev, "not increasing at {z}");
        prev = cur;
        z += 0.05;
    }
}

#[test]
fn exp_log_cdf_agrees_with_cdf() {
    let mut z = -37.0;
    while z <= 37.0 {
        let a = log_cdf(z).exp();
        let b = cdf(z);
        assert!((a - b).abs() <= 1e-12, "z={z}");
        z += 0.1;
    }
}

#[test]
fn inverse_mills_reference_points() {
    let at_zero = inverse_mills(0.0).unwrap();
    assert!((at_zero - (2.0 / PI).sqrt()).abs() < 1e-15);
    assert!((at_zero - 0.797_884_560_8).abs() < 1e-10);

    // z + 1/z − 2/z³ + 10/z⁵ − 74/z⁷ with z = 20 (asymptote of φ/Φ as z → −∞)
    let t: f64 = 20.0;
    let asym = t + 1.0 / t - 2.0 / t.powi(3) + 10.0 / t.powi(5) - 74.0 / t.powi(7);
    let got = inverse_mills(-20.0).unwrap();
    assert!(((got - asym) / asym).abs() < 1e-6, "{got} vs {asym}");

    let oracle = std_normal_pdf(5.0) / (1.0 - lower_tail_oracle(-5.0));
    let got = inverse_mills(5.0).unwrap();
    assert!((got - oracle).abs() < 1e-10);
}

#[test]
fn inverse_mills_positive_and_decreasing() {
    let mut prev = inv_mills(-80.0);
    let mut z = -80.0 + 0.05;
    while z <= 30.0 {
        let cur = inv_mills(z);
        assert!(cur > 0.0);
        assert!(cur < prev, "not decreasing at {z}");
        prev = cur;
        z += 0.05;
    }
    assert!((inv_mills(-1e4) - 1e4).abs() / 1e4 < 1e-6);
}

#[test]
fn derivative_of_neg_log_cdf_is_neg_inverse_mills() {
    let h = 1e-5;
    let mut z = -10.0;
    while z <= 10.0 {
        let fd = (-log_cdf(z + h) + log_cdf(z - h)) / (2.0 * h);
        let analytic = -inv_mills(z);
        let rel = ((fd - analytic) / analytic).abs();
        assert!(rel <= 1e-6, "z={z}: rel {rel}");
        z += 0.25;
    }
}

#[test]
fn neg_log_cdf_is_convex() {
    let h = 1e-5;
    let mut z = -10.0;
    while z <= 10.0 {
        let second = -log_cdf(z + h) + 2.0 * log_cdf(z) - log_cdf(z - h);
        assert!(second >= -1e-9, "z={z}: {second}");
        z += 0.25;
    }
}

#[test]
fn non_finite_inputs_are_rejected() {
    for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
        assert!(std_normal_cdf(bad).is_err());
        assert!(log_std_normal_cdf(bad).is_err());
        assert!(inverse_mills(bad).is_err());
    }
}
