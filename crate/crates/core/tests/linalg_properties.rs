use fkcouple_core::{reflection_matrix, sqrt_spd, symmetric_eigen, Matrix};
use proptest::prelude::*;

/// Random orthogonal matrix as a product of `d` Householder reflections.
fn orthogonal(d: usize, raw: &[f64]) -> Matrix<f64> {
    let mut q = Matrix::<f64>::identity(d);
    for k in 0..d {
        let v = &raw[k * d..(k + 1) * d];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 < 1e-6 {
            continue;
        }
        let mut h = Matrix::<f64>::identity(d);
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] -= 2.0 * v[i] * v[j] / n2;
            }
        }
        q = q.matmul(&h);
    }
    q
}

/// `Q diag(λ) Qᵀ` with `λ` log-uniform in `[1, cond]`.
fn spd(d: usize, raw: &[f64], logs: &[f64], cond: f64) -> Matrix<f64> {
    let q = orthogonal(d, raw);
    let lambdas: Vec<f64> = logs[..d].iter().map(|u| cond.powf(*u)).collect();
    let mut a = Matrix::<f64>::zeros(d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = (0..d).map(|k| q[(i, k)] * lambdas[k] * q[(j, k)]).sum();
        }
    }
    // Exact symmetry.
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    a
}

fn spd_strategy() -> impl Strategy<Value = Matrix<f64>> {
    (1usize..=8).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(-1.0f64..1.0, d * d),
            prop::collection::vec(0.0f64..1.0, d),
        )
            .prop_map(|(d, raw, logs)| spd(d, &raw, &logs, 1e4))
    })
}

fn rel_residual(s: &Matrix<f64>, a: &Matrix<f64>) -> f64 {
    s.matmul(&s.transpose()).sub(a).frobenius() / a.frobenius()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn square_root_reproduces_matrix(a in spd_strategy()) {
        let s = sqrt_spd(&a).unwrap();
        prop_assert!(rel_residual(&s, &a) <= 1e-10);
        prop_assert!(s.asymmetry() <= 1e-12 * s.max_abs());
        let eig = symmetric_eigen(&s);
        prop_assert!(eig.min() > 0.0);
    }

    #[test]
    fn square_root_scales(a in spd_strategy(), s in 0.1f64..10.0) {
        let root = sqrt_spd(&a).unwrap();
        let scaled = sqrt_spd(&a.scale(s * s)).unwrap();
        let diff = scaled.sub(&root.scale(s)).frobenius() / scaled.frobenius();
        prop_assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn reflector_is_orthogonal_involution(
        a in spd_strategy(),
        xi in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let d = a.dim();
        let xi = &xi[..d];
        prop_assume!(xi.iter().map(|x| x * x).sum::<f64>() > 1e-8);
        let sigma = sqrt_spd(&a).unwrap();
        let h = reflection_matrix(&sigma, xi).unwrap();
        let id = Matrix::<f64>::identity(d);
        prop_assert!(h.transpose().matmul(&h).sub(&id).max_abs() <= 1e-12);
        prop_assert!(h.matmul(&h).sub(&id).max_abs() <= 1e-12);
        prop_assert!(h.asymmetry() <= 1e-12);
        // v = σ⁻¹ξ computed by Gaussian elimination on σ v = ξ.
        let v = solve(&sigma, xi);
        let hv = h.mul_vec(&v);
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err = hv.iter().zip(&v).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt() / vn;
        prop_assert!(err <= 1e-12, "{err}");
    }
}

fn solve(m: &Matrix<f64>, b: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let mut a: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| m[(i, j)]).chain([b[i]]).collect())
        .collect();
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * p;
                }
            }
        }
    }
    (0..d).map(|i| a[i][d] / a[i][i]).collect()
}

#[test]
fn two_by_two_closed_form() {
    let s = sqrt_spd(&Matrix::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
    let (p, q) = ((1.0 + 3f64.sqrt()) / 2.0, (3f64.sqrt() - 1.0) / 2.0);
    assert!((s[(0, 0)] - p).abs() < 1e-14 && (s[(1, 1)] - p).abs() < 1e-14);
    assert!((s[(0, 1)] - q).abs() < 1e-14 && (s[(1, 0)] - q).abs() < 1e-14);
}

#[test]
fn single_precision_root() {
    let a = Matrix::<f32>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
    let s = sqrt_spd(&a).unwrap();
    assert!(s.matmul(&s).sub(&a).frobenius() / a.frobenius() < 1e-6);
}
