//! PDE data `(a, b, c)`, moduli of continuity and the Dini test.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoreError, Result};
use crate::linalg::{sqrt_spd, symmetric_eigen, Matrix, MAX_DIM};
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::{lit, Real};

/// Parametric family of a modulus of continuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusKind {
    /// `r^α`, `α ∈ (0, 1]`.
    Power {
        alpha: f64,
    },
    /// `min{1, (-log r)^(-α)}` for `r < 1`, and `1` for `r >= 1`.
    LogPower {
        alpha: f64,
    },
    /// Piecewise-linear through `(r, ρ)` knots, constant past the last knot.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
    Zero,
}

/// A nondecreasing `ρ` with `ρ(0) = 0`, scaled by a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusOfContinuity {
    #[serde(flatten)]
    pub kind: ModulusKind,
    pub scale: f64,
}

/// Outcome of the numeric Dini test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiniClass {
    Dini,
    NotDiniAtResolution,
}

impl fmt::Display for DiniClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiniClass::Dini => f.write_str("Dini"),
            DiniClass::NotDiniAtResolution => f.write_str("not Dini at this resolution"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniReport {
    pub class: DiniClass,
    /// `(eps0, ∫_{eps0}^1 ρ(r)/r dr)` along the halving ladder.
    pub ladder: Vec<(f64, f64)>,
    /// Relative change over the finest halving.
    pub final_relative_change: f64,
}

/// Finest cutoff of the Dini ladder.
pub const DINI_FINEST_CUTOFF: f64 = 1e-8;
/// Coarsest cutoff of the Dini ladder (the ladder is `1e-8 · 2^k <= 1e-4`).
pub const DINI_COARSEST_CUTOFF: f64 = 1e-4;
/// Relative change over the finest halving below which the integral counts as converged.
pub const DINI_STABILITY: f64 = 1e-3;

impl ModulusOfContinuity {
    pub fn zero() -> Self {
        Self {
            kind: ModulusKind::Zero,
            scale: 0.0,
        }
    }

    pub fn power(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("power modulus needs alpha in (0, 1], got {alpha}"));
        }
        Self::checked(ModulusKind::Power { alpha }, scale)
    }

    pub fn log_power(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("log-power modulus needs alpha > 0, got {alpha}"));
        }
        Self::checked(ModulusKind::LogPower { alpha }, scale)
    }

    /// Knots must have strictly increasing `r >= 0` and nondecreasing values;
    /// `(0, 0)` is prepended when absent.
    pub fn tabulated(mut knots: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        if knots.first().is_none_or(|k| k.0 > 0.0) {
            knots.insert(0, (0.0, 0.0));
        }
        if knots[0] != (0.0, 0.0) {
            return invalid("tabulated modulus must satisfy rho(0) = 0");
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 || !w[1].1.is_finite() {
                return invalid("tabulated knots must be increasing in r and nondecreasing in rho");
            }
        }
        Self::checked(ModulusKind::Tabulated { knots }, scale)
    }

    fn checked(kind: ModulusKind, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return invalid(format!("modulus scale must be finite and >= 0, got {scale}"));
        }
        Ok(Self { kind, scale })
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let shape = match &self.kind {
            ModulusKind::Zero => return 0.0,
            ModulusKind::Power { alpha } => r.powf(*alpha),
            ModulusKind::LogPower { alpha } => {
                if r >= 1.0 {
                    1.0
                } else {
                    (-r.ln()).powf(-alpha).min(1.0)
                }
            }
            ModulusKind::Tabulated { knots } => {
                let last = knots[knots.len() - 1];
                if r >= last.0 {
                    last.1
                } else {
                    let i = knots.partition_point(|k| k.0 <= r);
                    let (r0, v0) = knots[i - 1];
                    let (r1, v1) = knots[i];
                    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
                }
            }
        };
        self.scale * shape
    }

    /// Points in `(0, 1)` where the modulus has a kink, as `-log r`.
    fn log_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ModulusKind::LogPower { .. } => vec![1.0],
            ModulusKind::Tabulated { knots } => knots
                .iter()
                .filter(|k| k.0 > 0.0 && k.0 < 1.0)
                .map(|k| -k.0.ln())
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// `∫_{eps0}^1 ρ(r)/r dr`, computed as `∫_0^{-log eps0} ρ(e^{-s}) ds`.
pub fn dini_integral(rho: &ModulusOfContinuity, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return invalid(format!("eps0 must lie in (0, 1), got {eps0}"));
    }
    if rho.kind == ModulusKind::Zero || rho.scale == 0.0 {
        return Ok(0.0);
    }
    let upper = -eps0.ln();
    let mut cuts = vec![0.0];
    cuts.extend(rho.log_breakpoints().into_iter().filter(|&s| s > 0.0 && s < upper));
    cuts.push(upper);
    cuts.sort_by(f64::total_cmp);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(|s| rho.evaluate((-s).exp()), w[0], w[1], opts)?.value;
    }
    Ok(total)
}

/// Numeric, resolution-qualified Dini classification: the integral is
/// evaluated along `eps0 = 1e-8 · 2^k` up to `1e-4` and the modulus counts as
/// Dini when the finest halving changes it by at most [`DINI_STABILITY`].
pub fn classify_dini(rho: &ModulusOfContinuity) -> Result<DiniReport> {
    let mut cutoffs = Vec::new();
    let mut eps = DINI_FINEST_CUTOFF;
    while eps <= DINI_COARSEST_CUTOFF {
        cutoffs.push(eps);
        eps *= 2.0;
    }
    cutoffs.reverse();
    let ladder = cutoffs
        .iter()
        .map(|&e| dini_integral(rho, e).map(|v| (e, v)))
        .collect::<Result<Vec<_>>>()?;
    let n = ladder.len();
    let (fine, coarse) = (ladder[n - 1].1, ladder[n - 2].1);
    let change = if fine == 0.0 {
        0.0
    } else {
        (fine - coarse).abs() / fine.abs()
    };
    let class = if change <= DINI_STABILITY {
        DiniClass::Dini
    } else {
        DiniClass::NotDiniAtResolution
    };
    Ok(DiniReport {
        class,
        ladder,
        final_relative_change: change,
    })
}

pub type MatrixFn<T> = Arc<dyn Fn(T, &[T]) -> Matrix<T> + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(T, &[T], &mut [T]) + Send + Sync>;
pub type ScalarFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;

/// The coefficients `(a, b, c)` of
/// `∂u/∂t = ½ Σ a_ij ∂²u + Σ b_i ∂u + c u` together with their declared bounds.
#[derive(Clone)]
pub struct CoefficientField<T> {
    name: String,
    dim: usize,
    lambda: T,
    b_sup: T,
    c_sup: T,
    modulus: ModulusOfContinuity,
    a: MatrixFn<T>,
    sigma: Option<MatrixFn<T>>,
    b: Option<VectorFn<T>>,
    c: Option<ScalarFn<T>>,
}

impl<T: Real> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lambda", &self.lambda)
            .field("b_sup", &self.b_sup)
            .field("c_sup", &self.c_sup)
            .field("modulus", &self.modulus)
            .finish_non_exhaustive()
    }
}

impl<T: Real> CoefficientField<T> {
    /// Field with diffusion matrix `a`, zero drift and zero potential.
    pub fn new(
        dim: usize,
        lambda: T,
        modulus: ModulusOfContinuity,
        a: impl Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if dim > MAX_DIM {
            return Err(CoreError::Dimension(dim));
        }
        if !(lambda >= T::one() && lambda.is_finite()) {
            return invalid(format!("ellipticity constant must be finite and >= 1, got {lambda}"));
        }
        Ok(Self {
            name: "custom".into(),
            dim,
            lambda,
            b_sup: T::zero(),
            c_sup: T::zero(),
            modulus,
            a: Arc::new(a),
            sigma: None,
            b: None,
            c: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_drift(mut self, b_sup: T, b: impl Fn(T, &[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.b_sup = b_sup;
        self.b = Some(Arc::new(b));
        self
    }

    pub fn with_potential(mut self, c_sup: T, c: impl Fn(T, &[T]) -> T + Send + Sync + 'static) -> Self {
        self.c_sup = c_sup;
        self.c = Some(Arc::new(c));
        self
    }

    /// Supplies a closed-form `σ` with `σσᵀ = a`, bypassing the eigen-solver.
    pub fn with_sigma(mut self, sigma: impl Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.sigma = Some(Arc::new(sigma));
        self
    }

    /// Replaces `c` by `c + shift`.
    pub fn with_potential_shift(mut self, shift: T) -> Self {
        let base = self.c.take();
        self.c_sup += shift.abs();
        self.c = Some(match base {
            Some(c) => Arc::new(move |t, x| c(t, x) + shift),
            None => Arc::new(move |_, _| shift),
        });
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn b_sup(&self) -> T {
        self.b_sup
    }

    pub fn c_sup(&self) -> T {
        self.c_sup
    }

    pub fn modulus(&self) -> &ModulusOfContinuity {
        &self.modulus
    }

    pub fn has_drift(&self) -> bool {
        self.b.is_some()
    }

    pub fn has_potential(&self) -> bool {
        self.c.is_some()
    }

    #[inline]
    pub fn a(&self, t: T, x: &[T]) -> Matrix<T> {
        (self.a)(t, x)
    }

    /// `σ(t, x) = √a(t, x)`.
    #[inline]
    pub fn sigma(&self, t: T, x: &[T]) -> Result<Matrix<T>> {
        match &self.sigma {
            Some(s) => Ok(s(t, x)),
            None => sqrt_spd(&(self.a)(t, x)),
        }
    }

    #[inline]
    pub fn drift_into(&self, t: T, x: &[T], out: &mut [T]) {
        match &self.b {
            Some(b) => b(t, x, out),
            None => out.iter_mut().for_each(|v| *v = T::zero()),
        }
    }

    #[inline]
    pub fn potential(&self, t: T, x: &[T]) -> T {
        match &self.c {
            Some(c) => c(t, x),
            None => T::zero(),
        }
    }
}

/// Space-time sample points for [`validate_field`].
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    pub points: Vec<(T, Vec<T>)>,
}

/// First primes, used as Halton bases.
const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

impl<T: Real> Sampler<T> {
    pub fn new(points: Vec<(T, Vec<T>)>) -> Self {
        Self { points }
    }

    /// Tensor grid with `per_axis` points per axis over `[lo, hi]^d` at
    /// times `{0, T/2, T}`, plus `quasi_random` Halton points in space-time.
    /// The per-axis count is reduced when the tensor grid would exceed 10⁶ points.
    pub fn grid_and_halton(dim: usize, lo: T, hi: T, horizon: T, per_axis: usize, quasi_random: usize) -> Self {
        let mut per_axis = per_axis.max(2);
        while (per_axis as f64).powi(dim as i32) > 1e6 && per_axis > 2 {
            per_axis -= 1;
        }
        let mut points = Vec::new();
        let times = [T::zero(), horizon / lit(2.0), horizon];
        let total = per_axis.pow(dim as u32);
        let step = (hi - lo) / lit((per_axis - 1) as f64);
        for &t in &times {
            for flat in 0..total {
                let mut rem = flat;
                let x: Vec<T> = (0..dim)
                    .map(|_| {
                        let k = rem % per_axis;
                        rem /= per_axis;
                        lo + step * lit(k as f64)
                    })
                    .collect();
                points.push((t, x));
            }
        }
        for i in 1..=quasi_random as u64 {
            let t = horizon * lit(radical_inverse(i, PRIMES[0]));
            let x = (0..dim)
                .map(|k| lo + (hi - lo) * lit(radical_inverse(i, PRIMES[(k + 1) % PRIMES.len()])))
                .collect();
            points.push((t, x));
        }
        Self { points }
    }

    /// The default sampler: 101 points per axis plus 1000 Halton points.
    pub fn default_for(dim: usize, lo: T, hi: T, horizon: T) -> Self {
        Self::grid_and_halton(dim, lo, hi, horizon, 101, 1000)
    }
}

/// Slack added to every declared bound by [`validate_field`].
pub const VALIDATION_SLACK: f64 = 1e-9;
/// Largest relative asymmetry of `a` accepted by [`validate_field`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Largest distance of an eigenvalue outside `[Λ⁻¹, Λ]` (zero if none).
    pub eigen_excursion: f64,
    pub max_abs_b: f64,
    pub max_abs_c: f64,
    pub max_asymmetry: f64,
    /// Largest `‖σσᵀ - a‖_F / ‖a‖_F` over the samples.
    pub max_sigma_residual: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Checks the standing assumptions (ellipticity, bounded `b` and `c`,
/// symmetric `a`) on every sample point.
pub fn validate_field<T: Real>(field: &CoefficientField<T>, sampler: &Sampler<T>) -> ValidationReport {
    let lambda = field.lambda().as_f64();
    let mut r = ValidationReport {
        n_samples: sampler.points.len(),
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        eigen_excursion: 0.0,
        max_abs_b: 0.0,
        max_abs_c: 0.0,
        max_asymmetry: 0.0,
        max_sigma_residual: 0.0,
        passed: true,
        failures: Vec::new(),
    };
    let mut b = vec![T::zero(); field.dim()];
    let mut bad_sigma = None;
    for (t, x) in &sampler.points {
        let a = field.a(*t, x);
        if !a.is_finite() {
            r.failures.push(format!("a is not finite at t={t}, x={x:?}"));
            continue;
        }
        r.max_asymmetry = r.max_asymmetry.max(a.asymmetry().as_f64());
        let eig = symmetric_eigen(&a);
        let (lo, hi) = (eig.min().as_f64(), eig.max().as_f64());
        r.min_eigenvalue = r.min_eigenvalue.min(lo);
        r.max_eigenvalue = r.max_eigenvalue.max(hi);
        r.eigen_excursion = r.eigen_excursion.max(1.0 / lambda - lo).max(hi - lambda);
        match field.sigma(*t, x) {
            Ok(s) => {
                let resid = s.matmul(&s.transpose()).sub(&a).frobenius() / a.frobenius();
                r.max_sigma_residual = r.max_sigma_residual.max(resid.as_f64());
            }
            Err(e) => bad_sigma = Some(e.to_string()),
        }
        field.drift_into(*t, x, &mut b);
        let bn = crate::linalg::norm(&b).as_f64();
        r.max_abs_b = if bn.is_nan() { f64::NAN } else { r.max_abs_b.max(bn) };
        let c = field.potential(*t, x).as_f64().abs();
        r.max_abs_c = if c.is_nan() { f64::NAN } else { r.max_abs_c.max(c) };
    }
    if r.eigen_excursion > VALIDATION_SLACK {
        r.failures.push(format!(
            "eigenvalues span [{}, {}], outside [1/Λ, Λ] = [{}, {}]",
            r.min_eigenvalue,
            r.max_eigenvalue,
            1.0 / lambda,
            lambda
        ));
    }
    if !(r.max_abs_b <= field.b_sup().as_f64() + VALIDATION_SLACK) {
        r.failures
            .push(format!("|b| reaches {} > declared {}", r.max_abs_b, field.b_sup()));
    }
    if !(r.max_abs_c <= field.c_sup().as_f64() + VALIDATION_SLACK) {
        r.failures
            .push(format!("|c| reaches {} > declared {}", r.max_abs_c, field.c_sup()));
    }
    if r.max_asymmetry > SYMMETRY_TOLERANCE + VALIDATION_SLACK {
        r.failures
            .push(format!("a is asymmetric (relative {:e})", r.max_asymmetry));
    }
    if let Some(e) = bad_sigma {
        r.failures.push(format!("sigma could not be formed: {e}"));
    }
    r.passed = r.failures.is_empty();
    r
}

fn sgn<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Built-in coefficient fields. All vary only in the first coordinate and
/// carry a constant potential `c0`.
pub mod builtin {
    use super::*;

    fn with_c0<T: Real>(f: CoefficientField<T>, c0: T) -> CoefficientField<T> {
        if c0 == T::zero() {
            f
        } else {
            f.with_potential_shift(c0)
        }
    }

    /// `a = a0·I`, `b = (b0, …, b0)`, `c = c0`.
    pub fn constant<T: Real>(dim: usize, a0: T, b0: T, c0: T) -> Result<CoefficientField<T>> {
        if !(a0 > T::zero()) {
            return invalid(format!("a0 must be positive, got {a0}"));
        }
        let lambda = a0.max(a0.recip());
        let root = a0.sqrt();
        let mut f = CoefficientField::new(dim, lambda, ModulusOfContinuity::zero(), move |_, x: &[T]| {
            Matrix::scaled_identity(x.len(), a0)
        })?
        .with_sigma(move |_, x: &[T]| Matrix::scaled_identity(x.len(), root))
        .with_name("constant");
        if b0 != T::zero() {
            let sup = b0.abs() * lit::<T>(dim as f64).sqrt();
            f = f.with_drift(sup, move |_, _, out: &mut [T]| out.iter_mut().for_each(|v| *v = b0));
        }
        Ok(with_c0(f, c0))
    }

    /// `a = (1 + amp·sin x₁)^power · I`.
    pub fn sin_perturbed<T: Real>(dim: usize, amp: T, power: T, c0: T) -> Result<CoefficientField<T>> {
        if !(amp >= T::zero() && amp < T::one()) {
            return invalid(format!("amp must lie in [0, 1), got {amp}"));
        }
        if !(power > T::zero()) {
            return invalid(format!("power must be positive, got {power}"));
        }
        let lambda = (T::one() + amp).powf(power).max((T::one() - amp).powf(-power));
        let lip = (power * amp * (T::one() + amp).powf(power - T::one()).max(T::one())).as_f64();
        let modulus = if amp == T::zero() {
            ModulusOfContinuity::zero()
        } else {
            ModulusOfContinuity::power(1.0, lip)?
        };
        let half = power / lit(2.0);
        let f = CoefficientField::new(dim, lambda, modulus, move |_, x: &[T]| {
            Matrix::scaled_identity(x.len(), (T::one() + amp * x[0].sin()).powf(power))
        })?
        .with_sigma(move |_, x: &[T]| Matrix::scaled_identity(x.len(), (T::one() + amp * x[0].sin()).powf(half)))
        .with_name("sin");
        Ok(with_c0(f, c0))
    }

    fn isotropic<T: Real>(
        dim: usize,
        amp: T,
        modulus: ModulusOfContinuity,
        shape: impl Fn(T) -> T + Send + Sync + Clone + 'static,
        name: &str,
        c0: T,
    ) -> Result<CoefficientField<T>> {
        if !(amp >= T::zero() && amp < T::one()) {
            return invalid(format!("amp must lie in [0, 1), got {amp}"));
        }
        let lambda = (T::one() + amp).max((T::one() - amp).recip());
        let s2 = shape.clone();
        let f = CoefficientField::new(dim, lambda, modulus, move |_, x: &[T]| {
            Matrix::scaled_identity(x.len(), T::one() + amp * shape(x[0]))
        })?
        .with_sigma(move |_, x: &[T]| Matrix::scaled_identity(x.len(), (T::one() + amp * s2(x[0])).sqrt()))
        .with_name(name);
        Ok(with_c0(f, c0))
    }

    /// `a = (1 + amp·sgn(x₁)·min(|x₁|, 1)^α) · I`, Hölder of order `α` at the origin.
    pub fn holder<T: Real>(dim: usize, amp: T, alpha: T, c0: T) -> Result<CoefficientField<T>> {
        let modulus = ModulusOfContinuity::power(alpha.as_f64(), amp.as_f64() * 2f64.powf(1.0 - alpha.as_f64()))?;
        isotropic(
            dim,
            amp,
            modulus,
            move |s: T| sgn(s) * s.abs().min(T::one()).powf(alpha),
            "holder",
            c0,
        )
    }

    /// `a = (1 + amp·sgn(x₁)·min{1, (-log|x₁|)^(-α)}) · I`; Dini iff `α > 1`.
    pub fn log_modulus<T: Real>(dim: usize, amp: T, alpha: T, c0: T) -> Result<CoefficientField<T>> {
        let modulus = ModulusOfContinuity::log_power(alpha.as_f64(), 2.0 * amp.as_f64())?;
        let shape = move |s: T| {
            let r = s.abs();
            let l = if r >= T::one() {
                T::one()
            } else if r == T::zero() {
                T::zero()
            } else {
                (-r.ln()).powf(-alpha).min(T::one())
            };
            sgn(s) * l
        };
        isotropic(dim, amp, modulus, shape, "logmod", c0)
    }

    /// `a = I`, `b = -θ·sgn(x₁)·e₁`.
    pub fn sgn_drift<T: Real>(dim: usize, theta: T, c0: T) -> Result<CoefficientField<T>> {
        if !(theta >= T::zero()) {
            return invalid(format!("theta must be >= 0, got {theta}"));
        }
        let f = constant(dim, T::one(), T::zero(), T::zero())?
            .with_drift(theta, move |_, x: &[T], out: &mut [T]| {
                out.iter_mut().for_each(|v| *v = T::zero());
                out[0] = -theta * sgn(x[0]);
            })
            .with_name("sgn");
        Ok(with_c0(f, c0))
    }
}
