//! Log-log least-squares fits for scaling exponents.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_stderr: T,
    pub r_squared: T,
    pub n_points: usize,
}

/// Half-width of the slope band around 1 labelled "consistent with Lipschitz".
pub const LIPSCHITZ_BAND: f64 = 0.1;

impl<T: Real> ScalingFit<T> {
    pub fn consistent_with_lipschitz(&self) -> bool {
        (self.slope - T::one()).abs() <= lit(LIPSCHITZ_BAND)
    }

    /// Symmetric confidence interval `slope ± z·stderr`.
    pub fn slope_interval(&self, z: T) -> (T, T) {
        (self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr)
    }
}

fn sorted_checked<T: Real>(pairs: &[(T, T)]) -> Result<Vec<(T, T)>> {
    if pairs.len() < 3 {
        return invalid(format!("need at least 3 points, got {}", pairs.len()));
    }
    for &(r, v) in pairs {
        if !(r > T::zero() && v > T::zero() && r.is_finite() && v.is_finite()) {
            return invalid(format!("fit needs positive finite values, got ({r}, {v})"));
        }
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        a.0.as_f64()
            .total_cmp(&b.0.as_f64())
            .then(a.1.as_f64().total_cmp(&b.1.as_f64()))
    });
    Ok(sorted)
}

/// Weighted least squares of `y` on `x`. The response is taken relative to
/// the first value (`log(v / v₀)`) and `log v₀` is added back to the
/// intercept, so rescaling every `v` by a power of two leaves the slope
/// bit-identical.
fn least_squares<T: Real>(xs: &[T], vs: &[T], weights: Option<&[T]>) -> Result<ScalingFit<T>> {
    let n = xs.len();
    let v0 = vs[0];
    let ys: Vec<T> = vs.iter().map(|&v| (v / v0).ln()).collect();
    let ws: Vec<T> = match weights {
        Some(w) => w.to_vec(),
        None => vec![T::one(); n],
    };
    let wsum: T = ws.iter().copied().sum();
    let mx = xs.iter().zip(&ws).map(|(&x, &w)| w * x).sum::<T>() / wsum;
    let my = ys.iter().zip(&ws).map(|(&y, &w)| w * y).sum::<T>() / wsum;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxx += ws[i] * dx * dx;
        sxy += ws[i] * dx * dy;
        syy += ws[i] * dy * dy;
    }
    if !(sxx > T::zero()) {
        return invalid("regressor has no spread");
    }
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let ssr: T = (0..n)
        .map(|i| {
            let e = ys[i] - offset - slope * xs[i];
            ws[i] * e * e
        })
        .sum();
    let r_squared = if syy > T::zero() {
        (T::one() - ssr / syy).max(T::zero()).min(T::one())
    } else {
        T::one()
    };
    let dof = count::<T>(n - 2);
    let slope_stderr = if n > 2 { (ssr / dof / sxx).sqrt() } else { T::zero() };
    Ok(ScalingFit {
        slope,
        intercept: offset + v0.ln(),
        slope_stderr,
        r_squared,
        n_points: n,
    })
}

/// Ordinary least squares of `log v` on `log r`.
pub fn fit_power_law<T: Real>(pairs: &[(T, T)]) -> Result<ScalingFit<T>> {
    let sorted = sorted_checked(pairs)?;
    let xs: Vec<T> = sorted.iter().map(|p| p.0.ln()).collect();
    let vs: Vec<T> = sorted.iter().map(|p| p.1).collect();
    least_squares(&xs, &vs, None)
}

/// Power-law fit weighted by the inverse variance of `log v`, i.e. by
/// `(v / se)²` for each `(r, v, se)` triple.
pub fn fit_power_law_weighted<T: Real>(triples: &[(T, T, T)]) -> Result<ScalingFit<T>> {
    let pairs: Vec<(T, T)> = triples.iter().map(|t| (t.0, t.1)).collect();
    sorted_checked(&pairs)?;
    let mut sorted = triples.to_vec();
    sorted.sort_by(|a, b| {
        a.0.as_f64()
            .total_cmp(&b.0.as_f64())
            .then(a.1.as_f64().total_cmp(&b.1.as_f64()))
    });
    if sorted.iter().any(|t| !(t.2 > T::zero())) {
        return invalid("weighted fit needs positive standard errors");
    }
    let xs: Vec<T> = sorted.iter().map(|t| t.0.ln()).collect();
    let vs: Vec<T> = sorted.iter().map(|t| t.1).collect();
    let ws: Vec<T> = sorted.iter().map(|t| (t.1 / t.2) * (t.1 / t.2)).collect();
    least_squares(&xs, &vs, Some(&ws))
}

/// Least squares of `log v` on `log(r · max{1, -log r})`; requires `r < 1`.
pub fn fit_log_corrected<T: Real>(pairs: &[(T, T)]) -> Result<ScalingFit<T>> {
    let sorted = sorted_checked(pairs)?;
    if let Some(bad) = sorted.iter().find(|p| p.0 >= T::one()) {
        return invalid(format!("log-corrected fit needs r < 1, got {}", bad.0));
    }
    let xs: Vec<T> = sorted.iter().map(|p| (p.0 * (-p.0.ln()).max(T::one())).ln()).collect();
    let vs: Vec<T> = sorted.iter().map(|p| p.1).collect();
    least_squares(&xs, &vs, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_and_quadratic() {
        let lin = fit_power_law::<f64>(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).unwrap();
        assert!((lin.slope - 1.0).abs() < 1e-15);
        assert_eq!(lin.r_squared, 1.0);
        assert!(lin.intercept.abs() < 1e-15);
        let quad = fit_power_law::<f64>(&[(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)]).unwrap();
        assert!((quad.slope - 2.0).abs() < 1e-15);
    }

    #[test]
    fn noisy_power_law() {
        // Deterministic ±1% multiplicative perturbations.
        let noise = [0.01, -0.01, 0.004, -0.007, 0.01, -0.003, 0.0, 0.008];
        let pairs: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let r = 0.5f64.powi(i as i32);
                (r, 3.0 * r.powf(0.7) * (1.0 + e))
            })
            .collect();
        let fit = fit_power_law(&pairs).unwrap();
        assert!(fit.slope >= 0.68 && fit.slope <= 0.72, "{fit:?}");
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[(1.0, 1.0), (0.5, 0.5)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (0.5, 0.0), (0.25, 0.25)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (-0.5, 0.5), (0.25, 0.25)]).is_err());
        assert!(fit_log_corrected(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).is_err());
        assert!(fit_power_law(&[(0.5, 1.0), (0.5, 2.0), (0.5, 3.0)]).is_err());
    }

    #[test]
    fn log_corrected_exact_model() {
        let pairs: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&r| (r, r * -f64::ln(r))).collect();
        let fit = fit_log_corrected(&pairs).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_corrected_plain_linear_matches_direct_regression() {
        let pairs: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&r| (r, r)).collect();
        let fit = fit_log_corrected(&pairs).unwrap();
        // r·(-log r) decays more slowly than r, so the slope exceeds 1.
        assert!(fit.slope > 1.0);
        // Regressor x = log r + log(-log r); direct evaluation of the OLS slope.
        let xs: Vec<f64> = [1e-1f64, 1e-2, 1e-3].iter().map(|r| r.ln() + (-r.ln()).ln()).collect();
        let ys: Vec<f64> = [1e-1f64, 1e-2, 1e-3].iter().map(|r| r.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        assert!((fit.slope - sxy / sxx).abs() < 1e-12);
    }

    #[test]
    fn sub_linear_power_separates_from_one() {
        let pairs: Vec<(f64, f64)> = (1..=6).map(|k| 0.5f64.powi(k)).map(|r| (r, r.powf(0.8))).collect();
        let fit = fit_log_corrected(&pairs).unwrap();
        assert!((fit.slope - 1.0).abs() > 3.0 * fit.slope_stderr, "{fit:?}");
        let plain = fit_power_law(&pairs).unwrap();
        assert!((plain.slope - 0.8).abs() < 1e-12);
    }

    #[test]
    fn weighted_fit_of_exact_data() {
        let triples: Vec<(f64, f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&r| (r, 2.0 * r, 0.01 * r))
            .collect();
        let fit = fit_power_law_weighted(&triples).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_band() {
        let mk = |slope| ScalingFit {
            slope,
            intercept: 0.0,
            slope_stderr: 0.0,
            r_squared: 1.0,
            n_points: 3,
        };
        assert!(mk(0.95f64).consistent_with_lipschitz());
        assert!(!mk(0.85f64).consistent_with_lipschitz());
        assert_eq!(mk(1.0f64).slope_interval(2.0), (1.0, 1.0));
    }
}
