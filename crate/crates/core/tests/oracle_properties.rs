use std::f64::consts::PI;

use fkcouple_core::{
    bm_coupling_expectation, heat_kernel, running_max_bounds, sgn_drift_density, Matrix, RunningMaxQuery, SgnDriftQuery,
};

fn p(theta: f64, t: f64, x: f64, y: f64) -> f64 {
    sgn_drift_density(SgnDriftQuery { theta, t, x, y }).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// erf by Maclaurin series for small arguments and a continued fraction for
/// erfc otherwise; kept separate from the library's special functions.
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        let (mut term, mut sum, mut n) = (x, x, 0.0);
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        return 2.0 / PI.sqrt() * sum;
    }
    // erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
    let mut f = x;
    for k in (1..200).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    1.0 - (-x * x).exp() / PI.sqrt() / f
}

#[test]
fn sgn_density_normalises() {
    for theta in [0.5, 1.0, 2.0] {
        for t in [0.25, 1.0] {
            for x in [0.5, -0.3, 0.0] {
                let total = simpson(|y| p(theta, t, x, y), -20.0, 0.0, 40_000)
                    + simpson(|y| p(theta, t, x, y), 0.0, 20.0, 40_000);
                assert!((total - 1.0).abs() <= 1e-6, "θ={theta} t={t} x={x}: {total}");
            }
        }
    }
}

#[test]
fn sgn_density_sign_symmetry_and_positivity() {
    for theta in [0.5, 1.0, 2.0] {
        for t in [0.1, 1.0, 3.0] {
            for i in -20..=20 {
                for j in -20..=20 {
                    let (x, y) = (i as f64 * 0.15, j as f64 * 0.15);
                    let v = p(theta, t, x, y);
                    assert!(v >= 0.0);
                    assert!((v - p(theta, t, -x, -y)).abs() <= 1e-12, "{theta} {t} {x} {y}");
                }
            }
        }
    }
}

#[test]
fn sgn_density_continuous_across_case_boundaries() {
    for theta in [0.5, 1.0, 2.0] {
        for s in [-1.0, -0.2, 0.3, 1.0] {
            assert!((p(theta, 1.0, 0.0, s) - p(theta, 1.0, -1e-15, s)).abs() < 1e-12);
            assert!((p(theta, 1.0, s, 0.0) - p(theta, 1.0, s, -1e-15)).abs() < 1e-12);
        }
    }
}

#[test]
fn sgn_density_is_smooth_in_x_at_origin() {
    // The backward variable only sees a jump in the second derivative.
    for y in [-0.7, 0.5, 1.2] {
        let f = |x: f64| p(1.0, 1.0, x, y);
        let h = 1e-6;
        let right = (f(h) - f(0.0)) / h;
        let left = (f(0.0) - f(-h)) / h;
        assert!((right - left).abs() < 1e-5, "{y}: {right} vs {left}");
    }
}

#[test]
fn sgn_density_has_a_kink_in_y() {
    // Zero net flux through the origin: ½p' + θ sgn(y) p is continuous,
    // so p'(0+) - p'(0-) = -4θ p(0): a peak at the origin.
    for (theta, t, x) in [(1.0, 1.0, 0.5), (0.5, 0.25, -0.3), (2.0, 1.0, 0.0)] {
        let f = |y: f64| p(theta, t, x, y);
        let h = 1e-6;
        let right = (f(h) - f(0.0)) / h;
        let left = (f(0.0) - f(-h)) / h;
        let jump = 4.0 * theta * f(0.0);
        assert!(jump > 1e-3);
        assert!(
            ((left - right) - jump).abs() < 1e-4 * jump.max(1.0),
            "{right} {left} {jump}"
        );
    }
    // Lipschitz in both variables: bounded quotients on a grid.
    for k in 1..100 {
        let s = -2.0 + 0.04 * k as f64;
        assert!(((p(1.0, 1.0, s + 1e-4, 0.5) - p(1.0, 1.0, s, 0.5)) / 1e-4).abs() < 10.0);
        assert!(((p(1.0, 1.0, 0.5, s + 1e-4) - p(1.0, 1.0, 0.5, s)) / 1e-4).abs() < 10.0);
    }
}

#[test]
fn theta_zero_reduces_to_heat_kernel() {
    let one = Matrix::<f64>::identity(1);
    for t in [0.25, 1.0] {
        for i in -10..=10 {
            for j in -10..=10 {
                let (x, y) = (i as f64 * 0.3, j as f64 * 0.3);
                let a = p(0.0, t, x, y);
                let b = heat_kernel(&one, &[0.0], t, &[x], &[y]).unwrap();
                assert!((a - b).abs() <= 1e-12);
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn heat_kernel_normalises() {
    for (a0, b0, t) in [(1.0f64, 0.0, 1.0), (4.0, 0.5, 1.0), (0.3, -1.0, 0.2)] {
        let a = Matrix::from_diag(&[a0]);
        let m = 0.2 + t * b0;
        let w = 20.0 * (a0 * t).sqrt();
        let total = simpson(
            |y| heat_kernel(&a, &[b0], t, &[0.2], &[y]).unwrap(),
            m - w,
            m + w,
            20_000,
        );
        assert!((total - 1.0).abs() <= 1e-10, "{total}");
    }
}

#[test]
fn running_max_matches_reference_values() {
    let q = |t, x| running_max_bounds(RunningMaxQuery { t, x, c1: 1.0, c2: 1.0 }).unwrap();
    assert_eq!(q(1.0, 0.0).exact, 1.0);
    assert!((q(1.0, 1.0).exact - (1.0 - erf(1.0 / 2f64.sqrt()))).abs() < 1e-14);
    assert!((q(1.0, 1.0).exact - 0.31731).abs() < 5e-6);
    let b = q(1.0, 2.0);
    assert!((b.upper - 0.05399).abs() < 5e-6);
    assert!((b.exact - 0.04550).abs() < 5e-6);
}

#[test]
fn running_max_exact_between_bounds() {
    for t in [0.1, 0.5, 1.0, 4.0] {
        for k in 1..=60 {
            let x = 0.05 * k as f64;
            let b = running_max_bounds(RunningMaxQuery { t, x, c1: 1.0, c2: 1.0 }).unwrap();
            assert!(b.exact <= b.upper, "t={t} x={x}");
            assert!(b.exact >= b.lower(), "t={t} x={x}");
        }
    }
}

/// `E[t ∧ τ] = ∫_0^t P(τ > s) ds` with `P(τ > s) = erf(d0 / (2√(2s)))`,
/// midpoint rule in `u = √s`.
fn coupling_brute_force(d0: f64, t: f64, n: usize) -> f64 {
    let h = t.sqrt() / n as f64;
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            2.0 * u * erf(d0 / (2.0 * (2.0f64).sqrt() * u)) * h
        })
        .sum()
}

#[test]
fn coupling_expectation_matches_brute_force() {
    for d0 in [0.2, 0.1, 0.05] {
        let q = bm_coupling_expectation(d0, 1.0).unwrap();
        let b = coupling_brute_force(d0, 1.0, 400_000);
        assert!((q - b).abs() <= 1e-6, "{d0}: {q} vs {b}");
    }
    // Reference values for the unit-horizon ladder.
    for (d0, want) in [
        (0.2, 0.14984),
        (0.1, 0.07732),
        (0.05, 0.03927),
        (0.025, 0.01979),
        (0.0125, 0.00993),
    ] {
        assert!((bm_coupling_expectation(d0, 1.0).unwrap() - want).abs() < 1e-5);
    }
}

#[test]
fn coupling_expectation_is_monotone() {
    let mut prev_t = 0.0;
    for k in 1..=30 {
        let t = 0.1 * k as f64;
        let mut prev_d = 0.0;
        for j in 1..=30 {
            let v = bm_coupling_expectation(0.02 * j as f64, t).unwrap();
            assert!(v >= prev_d);
            prev_d = v;
        }
        let v = bm_coupling_expectation(0.1, t).unwrap();
        assert!(v >= prev_t);
        prev_t = v;
    }
    assert!((bm_coupling_expectation(1e8, 2.0).unwrap() - 2.0).abs() < 1e-9);
}
