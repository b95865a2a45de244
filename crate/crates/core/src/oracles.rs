//! Closed-form reference values: the sgn-drift transition density, Gaussian
//! heat kernels, Brownian running-maximum laws and the 1D coupling-time
//! expectation.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoreError, Result};
use crate::linalg::{cholesky, Matrix};
use crate::quadrature::{integrate, QuadOptions};

/// `N(mean, var)` density at `y`.
#[inline]
pub fn gaussian_density_1d(mean: f64, var: f64, y: f64) -> f64 {
    let d = y - mean;
    (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgnDriftQuery {
    pub theta: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Transition density `p(0, x; t, y)` of `dX = dB - θ sgn(X) dt`.
///
/// Each case is a Gaussian term plus `θ e^{∓2θy} ∫_a^∞ exp(-(ξ-θt)²/2t) dξ / √(2πt)`,
/// where the tail integral equals `√(πt/2) erfc((a - θt)/√(2t))`.
pub fn sgn_drift_density(q: SgnDriftQuery) -> Result<f64> {
    let SgnDriftQuery { theta, t, x, y } = q;
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return invalid(format!("theta must be non-negative, got {theta}"));
    }
    if !(x.is_finite() && y.is_finite()) {
        return invalid("x and y must be finite");
    }
    if theta == 0.0 {
        return Ok(gaussian_density_1d(x, t, y));
    }
    let tail = |a: f64| 0.5 * libm::erfc((a - theta * t) / (2.0 * t).sqrt());
    let norm = (2.0 * PI * t).sqrt();
    let g = |shift: f64, m: f64| (shift - m * m / (2.0 * t)).exp() / norm;
    let v = match (x >= 0.0, y >= 0.0) {
        (true, true) => g(0.0, x - y - theta * t) + theta * (-2.0 * theta * y).exp() * tail(x + y),
        (true, false) => g(2.0 * theta * x, x - y + theta * t) + theta * (2.0 * theta * y).exp() * tail(x - y),
        (false, true) => g(-2.0 * theta * x, x - y - theta * t) + theta * (-2.0 * theta * y).exp() * tail(-x + y),
        (false, false) => g(0.0, x - y + theta * t) + theta * (2.0 * theta * y).exp() * tail(-x - y),
    };
    Ok(v)
}

/// Density of `N(x + t·b0, t·a0)` at `y`.
pub fn heat_kernel(a0: &Matrix<f64>, b0: &[f64], t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = a0.dim();
    if b0.len() != d || x.len() != d || y.len() != d {
        return Err(CoreError::Dimension(d));
    }
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("time must be positive, got {t}"));
    }
    if a0.asymmetry() > 1e-12 * a0.max_abs().max(1.0) {
        return invalid("a0 is not symmetric");
    }
    if d == 1 {
        if !(a0[(0, 0)] > 0.0) {
            return invalid(format!("a0 = {} is singular", a0[(0, 0)]));
        }
        return Ok(gaussian_density_1d(x[0] + t * b0[0], t * a0[(0, 0)], y[0]));
    }
    let cov = a0.scale(t);
    let l = cholesky(&cov).map_err(|_| CoreError::Validation("a0 is singular or indefinite".into()))?;
    // Solve L w = y - m; the quadratic form is |w|².
    let mut w = [0.0; crate::linalg::MAX_DIM];
    let mut log_det = 0.0;
    for i in 0..d {
        let mut s = y[i] - (x[i] + t * b0[i]);
        for k in 0..i {
            s -= l[(i, k)] * w[k];
        }
        w[i] = s / l[(i, i)];
        log_det += l[(i, i)].ln();
    }
    let q: f64 = w[..d].iter().map(|v| v * v).sum();
    Ok((-0.5 * q - log_det - 0.5 * d as f64 * (2.0 * PI).ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningMaxQuery {
    pub t: f64,
    pub x: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunningMaxBounds {
    /// Upper bound on `P(sup M ≥ x)` given `⟨M⟩_t ≤ c₂ t`.
    pub upper: f64,
    /// Upper bound on `P(sup M < x)` given `⟨M⟩_t ≥ c₁ t`.
    pub lower_level: f64,
    /// `P(sup_{s≤t} B_s ≥ x)` for standard Brownian motion.
    pub exact: f64,
}

impl RunningMaxBounds {
    /// Lower bound on `P(sup M ≥ x)` implied by `lower_level`.
    pub fn lower(&self) -> f64 {
        1.0 - self.lower_level
    }
}

pub fn running_max_bounds(q: RunningMaxQuery) -> Result<RunningMaxBounds> {
    let RunningMaxQuery { t, x, c1, c2 } = q;
    if !(t > 0.0 && t.is_finite()) || !(x >= 0.0) || !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
        return invalid(format!("invalid running-max query {q:?}"));
    }
    let upper = (2.0 * c2 * t / (PI * x * x)).sqrt() * (-x * x / (2.0 * c2 * t)).exp();
    let lower_level = (2.0 / (c1 * PI * t)).sqrt() * x;
    let exact = libm::erfc(x / (2.0 * t).sqrt());
    Ok(RunningMaxBounds {
        upper,
        lower_level,
        exact,
    })
}

/// Exact `E[t ∧ τ]` for reflection-coupled 1D Brownian motions started
/// `d0` apart: `∫_0^t (2Φ(d0/(2√s)) - 1) ds`.
pub fn bm_coupling_expectation(d0: f64, t: f64) -> Result<f64> {
    if !(d0 > 0.0 && t > 0.0 && t.is_finite()) {
        return invalid(format!("need d0 > 0 and t > 0, got d0 = {d0}, t = {t}"));
    }
    if d0.is_infinite() {
        return Ok(t);
    }
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    // s = u² removes the √s behaviour at the origin.
    let q = integrate(
        |u| {
            if u == 0.0 {
                0.0
            } else {
                2.0 * u * libm::erf(d0 / (2.0 * SQRT_2 * u))
            }
        },
        0.0,
        t.sqrt(),
        opts,
    )?;
    Ok(q.value)
}
