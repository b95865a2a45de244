//! Reflection coupling. Until the coupling time, `Z` is driven by the
//! reflected increments `H_k ΔB_k` with
//! `H = I - 2 v vᵀ / |v|²`, `v = σ(T-t, Z)⁻¹ (X - Z)`;
//! from the coupling time on, `Z` is fused to `X`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{classify_dini, CoefficientField, DiniClass, ModulusOfContinuity};
use crate::error::{invalid, CoreError, Result};
use crate::linalg::{cholesky, cholesky_solve_in_place, dot, norm, Matrix, MAX_DIM};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::rng::{RngStream, AUX_COUPLING, AUX_UNIFORMS};
use crate::scalar::{count, lit, Real};
use crate::sde::{map_paths, NoiseSource, Particle, SamplePath, TimeGrid};
use crate::stats::Estimate;

/// `H = I - 2 v vᵀ / |v|²` with `v = σ_Z⁻¹ ξ`.
pub fn reflection_matrix<T: Real>(sigma_z: &Matrix<T>, xi: &[T]) -> Result<Matrix<T>> {
    let n = sigma_z.dim();
    if xi.len() != n {
        return invalid(format!("direction has dimension {}, matrix has {n}", xi.len()));
    }
    let len = norm(xi);
    let floor = lit::<T>(1e-300).max(T::min_positive_value());
    if !(len >= floor) {
        return Err(CoreError::DegenerateDirection { norm: len.as_f64() });
    }
    let mut v = [T::zero(); MAX_DIM];
    if n == 1 {
        return Ok(Matrix::scaled_identity(1, -T::one()));
    }
    v[..n].copy_from_slice(xi);
    // σ is symmetric positive definite, so a Cholesky solve gives σ⁻¹ξ.
    let l = cholesky(sigma_z)?;
    cholesky_solve_in_place(&l, &mut v[..n]);
    let vn = norm(&v[..n]);
    if !(vn > T::zero() && vn.is_finite()) {
        return Err(CoreError::DegenerateDirection { norm: len.as_f64() });
    }
    for e in v[..n].iter_mut() {
        *e /= vn;
    }
    let mut h = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] -= lit::<T>(2.0) * v[i] * v[j];
        }
    }
    Ok(h)
}

/// How a crossing of `X - Z` through zero between grid nodes is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrossingCheck {
    /// Only the node-wise tolerance test.
    None,
    /// Also couple when the component of `X - Z` along its previous
    /// direction changes sign.
    SignChange,
    /// Sign change, or a Brownian-bridge crossing drawn with probability
    /// `exp(-2 |ξ_k| p_{k+1} / (q dt))` where `p_{k+1}` is the new separation
    /// along the old direction and `q` its local quadratic-variation rate.
    #[default]
    Bridge,
}

/// When `X` and `Z` are declared coupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRule<T> {
    /// Node-wise threshold on `|X_k - Z_k|`.
    pub tol: T,
    pub crossing: CrossingCheck,
}

impl<T: Real> CouplingRule<T> {
    /// `√dt · Λ^(-1/2) / 10`.
    pub fn default_tol(grid: &TimeGrid<T>, lambda: T) -> T {
        grid.dt().sqrt() / lambda.sqrt() / lit(10.0)
    }

    /// Default tolerance with bridge crossing detection.
    pub fn default_for(field: &CoefficientField<T>, grid: &TimeGrid<T>) -> Self {
        Self {
            tol: Self::default_tol(grid, field.lambda()),
            crossing: CrossingCheck::Bridge,
        }
    }

    pub fn tolerance_only(tol: T) -> Self {
        Self {
            tol,
            crossing: CrossingCheck::None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol >= T::zero() && self.tol.is_finite()) {
            return invalid(format!("coupling tolerance must be finite and >= 0, got {}", self.tol));
        }
        Ok(())
    }
}

/// Paired trajectories with their coupling time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath<T> {
    pub path_x: SamplePath<T>,
    pub path_z: SamplePath<T>,
    /// First node at which coupling was declared; `None` if not coupled by `T`.
    pub tau_index: Option<usize>,
    /// `tau_index · dt`, or `T` when not coupled.
    pub tau_time: T,
}

/// Outcome of a coupled run, without the recorded states.
#[derive(Debug, Clone)]
pub struct CoupledOutcome<T> {
    pub x: Particle<T>,
    pub z: Particle<T>,
    pub tau_index: Option<usize>,
    /// Number of steps simulated.
    pub steps: usize,
}

/// Advances the pair `(X, Z)` for at most `max_steps` steps, calling
/// `observe` after each. With `stop_at_coupling` the run ends as soon as the
/// pair couples.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled<T: Real, N: NoiseSource<T>>(
    field: &CoefficientField<T>,
    x: &[T],
    z: &[T],
    grid: TimeGrid<T>,
    noise: &mut N,
    rule: CouplingRule<T>,
    max_steps: usize,
    stop_at_coupling: bool,
    mut observe: impl FnMut(&Particle<T>, &Particle<T>),
) -> Result<CoupledOutcome<T>> {
    rule.validate()?;
    let dim = field.dim();
    if x.len() != dim || z.len() != dim {
        return invalid(format!("start points must have dimension {dim}"));
    }
    if !(x.iter().chain(z).all(|v| v.is_finite())) {
        return invalid("start points must be finite");
    }
    let dt = grid.dt();
    let horizon = grid.horizon();
    let two: T = lit(2.0);
    let mut px = Particle::new(x);
    let mut pz = Particle::new(z);
    let mut db = [T::zero(); MAX_DIM];
    let mut hdb = [T::zero(); MAX_DIM];
    let mut xi = [T::zero(); MAX_DIM];
    let mut tau_index = None;

    let sep = |a: &[T], b: &[T], out: &mut [T]| {
        for i in 0..a.len() {
            out[i] = a[i] - b[i];
        }
    };
    sep(x, z, &mut xi[..dim]);
    if norm(&xi[..dim]) <= rule.tol {
        tau_index = Some(0);
        pz.x.copy_from_slice(&px.x);
    }
    observe(&px, &pz);
    let steps = max_steps.min(grid.steps());
    let mut done = 0;
    for k in 0..steps {
        if stop_at_coupling && tau_index.is_some() {
            break;
        }
        let s = horizon - grid.time(k);
        let aux: [f64; AUX_UNIFORMS] = noise.next_increment(dt, &mut db[..dim]);
        let sigma_x = field.sigma(s, &px.x)?;
        if tau_index.is_some() {
            let increment = px.advance(field, s, dt, &sigma_x, &db[..dim], k)?;
            pz.exponent.add(increment);
            pz.x.copy_from_slice(&px.x);
        } else {
            let sigma_z = field.sigma(s, &pz.x)?;
            sep(&px.x, &pz.x, &mut xi[..dim]);
            let h = reflection_matrix(&sigma_z, &xi[..dim])?;
            h.mul_vec_into(&db[..dim], &mut hdb[..dim]);
            px.advance(field, s, dt, &sigma_x, &db[..dim], k)?;
            pz.advance(field, s, dt, &sigma_z, &hdb[..dim], k)?;

            let mut next = [T::zero(); MAX_DIM];
            sep(&px.x, &pz.x, &mut next[..dim]);
            let mut coupled = norm(&next[..dim]) <= rule.tol;
            if !coupled && rule.crossing != CrossingCheck::None {
                let gap = norm(&xi[..dim]);
                let mut e = [T::zero(); MAX_DIM];
                for i in 0..dim {
                    e[i] = xi[i] / gap;
                }
                let along = dot(&next[..dim], &e[..dim]);
                if along <= T::zero() {
                    coupled = true;
                } else if rule.crossing == CrossingCheck::Bridge {
                    // αᵀe with α = σ_X - σ_Z H.
                    let mut ax = [T::zero(); MAX_DIM];
                    let mut az = [T::zero(); MAX_DIM];
                    let mut haz = [T::zero(); MAX_DIM];
                    sigma_x.transpose().mul_vec_into(&e[..dim], &mut ax[..dim]);
                    sigma_z.transpose().mul_vec_into(&e[..dim], &mut az[..dim]);
                    h.transpose().mul_vec_into(&az[..dim], &mut haz[..dim]);
                    let mut q = T::zero();
                    for i in 0..dim {
                        let d = ax[i] - haz[i];
                        q += d * d;
                    }
                    if q > T::zero() {
                        let p = (-two * gap * along / (q * dt)).exp();
                        coupled = aux[AUX_COUPLING] <= p.as_f64();
                    }
                }
            }
            if coupled {
                tau_index = Some(k + 1);
                pz.x.copy_from_slice(&px.x);
            }
        }
        done = k + 1;
        observe(&px, &pz);
    }
    Ok(CoupledOutcome {
        x: px,
        z: pz,
        tau_index,
        steps: done,
    })
}

/// Simulates and records a coupled pair over the whole grid.
pub fn simulate_coupled<T: Real>(
    field: &CoefficientField<T>,
    x: &[T],
    z: &[T],
    grid: TimeGrid<T>,
    rng: &mut RngStream,
    rule: CouplingRule<T>,
) -> Result<CoupledPath<T>> {
    let mut path_x = SamplePath::start(grid, x);
    let mut path_z = SamplePath::start(grid, z);
    let mut first = true;
    let out = run_coupled(field, x, z, grid, rng, rule, grid.steps(), false, |px, pz| {
        if first {
            // Node 0 is already in place; a coupling at 0 fuses it.
            path_z.states[..pz.x.len()].copy_from_slice(&pz.x);
            first = false;
        } else {
            path_x.push(px);
            path_z.push(pz);
        }
    })?;
    let tau_time = out.tau_index.map_or(grid.horizon(), |k| grid.time(k));
    Ok(CoupledPath {
        path_x,
        path_z,
        tau_index: out.tau_index,
        tau_time,
    })
}

/// Which block of counter-based streams a Monte Carlo estimate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathBlock {
    pub seed: u64,
    pub first_index: u64,
    pub n_paths: usize,
}

impl PathBlock {
    pub fn new(seed: u64, n_paths: usize) -> Self {
        Self {
            seed,
            first_index: 0,
            n_paths,
        }
    }

    pub fn offset(self, first_index: u64) -> Self {
        Self { first_index, ..self }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return invalid(format!("need at least two paths, got {}", self.n_paths));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingEstimate<T> {
    /// Mean and standard error of `t ∧ τ`.
    pub tau: Estimate<T>,
    /// Fraction of pairs coupled by `t`.
    pub fraction_coupled: T,
}

/// Monte Carlo estimate of `E[t ∧ τ]`. Pairs are simulated only until they
/// couple or reach `t` (which must not exceed the grid horizon).
pub fn coupling_time_expectation<T: Real>(
    field: &CoefficientField<T>,
    x: &[T],
    z: &[T],
    t: T,
    grid: TimeGrid<T>,
    block: PathBlock,
    rule: CouplingRule<T>,
) -> Result<CouplingEstimate<T>> {
    block.validate()?;
    if !(t >= T::zero() && t <= grid.horizon()) {
        return invalid(format!("cap t = {t} must lie in [0, {}]", grid.horizon()));
    }
    let max_steps = (t / grid.dt()).ceil().as_f64() as usize;
    let samples = map_paths(block.n_paths, block.first_index, |idx| {
        let mut rng = RngStream::new(block.seed, idx, field.dim());
        let out = run_coupled(field, x, z, grid, &mut rng, rule, max_steps, true, |_, _| {})?;
        Ok(match out.tau_index {
            Some(k) => {
                let tk = grid.time(k);
                (tk.min(t), tk <= t)
            }
            None => (t, false),
        })
    })?;
    let taus: Vec<T> = samples.iter().map(|s| s.0).collect();
    let coupled = samples.iter().filter(|s| s.1).count();
    Ok(CouplingEstimate {
        tau: Estimate::from_samples(&taus),
        fraction_coupled: count::<T>(coupled) / count(samples.len()),
    })
}

/// One row of the coupling-time table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingRow<T> {
    pub distance: T,
    pub horizon: T,
    pub n_paths: usize,
    pub mean_tau_capped: T,
    pub stderr: T,
    pub fraction_coupled: T,
    pub couple_tol: T,
}

pub const COUPLING_CSV_HEADER: &str = "distance,horizon,n_paths,mean_tau_capped,stderr,fraction_coupled,couple_tol";

impl<T: Real> CouplingRow<T> {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.distance,
            self.horizon,
            self.n_paths,
            self.mean_tau_capped,
            self.stderr,
            self.fraction_coupled,
            self.couple_tol
        )
    }
}

/// Estimates `E[t ∧ τ]` between `base` and `base + r·direction` for every
/// distance in the ladder; distance `i` uses path indices
/// `[i·n, (i+1)·n)` of the block's seed.
#[allow(clippy::too_many_arguments)]
pub fn coupling_ladder<T: Real>(
    field: &CoefficientField<T>,
    base: &[T],
    direction: &[T],
    ladder: &[T],
    t: T,
    grid: TimeGrid<T>,
    block: PathBlock,
    rule: CouplingRule<T>,
) -> Result<Vec<CouplingRow<T>>> {
    let unit = unit_direction(direction)?;
    ladder
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let z: Vec<T> = base.iter().zip(&unit).map(|(&b, &u)| b + r * u).collect();
            let sub = block.offset(block.first_index + (i * block.n_paths) as u64);
            let est = coupling_time_expectation(field, base, &z, t, grid, sub, rule)?;
            Ok(CouplingRow {
                distance: r,
                horizon: t,
                n_paths: block.n_paths,
                mean_tau_capped: est.tau.mean,
                stderr: est.tau.stderr,
                fraction_coupled: est.fraction_coupled,
                couple_tol: rule.tol,
            })
        })
        .collect()
}

pub(crate) fn unit_direction<T: Real>(direction: &[T]) -> Result<Vec<T>> {
    let n = norm(direction);
    if !(n > T::zero() && n.is_finite()) {
        return invalid("direction must be a nonzero finite vector");
    }
    Ok(direction.iter().map(|&d| d / n).collect())
}

/// Parameters of the comparison function
/// `f(η) = ∫_0^η exp(-∫_0^θ 2γ³ ρ(r)/r dr) dθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub gamma: f64,
    pub rho: ModulusOfContinuity,
}

impl LyapunovParams {
    pub fn new(gamma: f64, rho: ModulusOfContinuity) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return invalid(format!("gamma must be positive, got {gamma}"));
        }
        Ok(Self { gamma, rho })
    }
}

const LYAPUNOV_INNER: QuadOptions = QuadOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-12,
    max_intervals: 2000,
};
const LYAPUNOV_OUTER: QuadOptions = QuadOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-11,
    max_intervals: 2000,
};

/// `∫_0^θ 2γ³ ρ(r)/r dr`, as `2γ³ ∫_0^∞ ρ(θ e^{-s}) ds`.
fn lyapunov_exponent(params: &LyapunovParams, theta: f64) -> Result<f64> {
    if theta <= 0.0 || params.rho.scale == 0.0 {
        return Ok(0.0);
    }
    let inner = integrate_to_infinity(|s| params.rho.evaluate(theta * (-s).exp()), 0.0, LYAPUNOV_INNER)?;
    Ok(2.0 * params.gamma.powi(3) * inner.value)
}

/// Evaluates the comparison function by nested adaptive quadrature.
pub fn lyapunov_f(params: &LyapunovParams, eta: f64) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return invalid(format!("eta must be finite and >= 0, got {eta}"));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    if classify_dini(&params.rho)?.class != DiniClass::Dini {
        return Err(CoreError::Divergence(
            "modulus is not Dini; the inner integral diverges".into(),
        ));
    }
    let mut failure = None;
    let q = integrate(
        |theta| match lyapunov_exponent(params, theta) {
            Ok(g) => (-g).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        eta,
        LYAPUNOV_OUTER,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin;

    #[test]
    fn scalar_reflection_is_minus_one() {
        let h = reflection_matrix(&Matrix::identity(1), &[0.3f64]).unwrap();
        assert_eq!(h[(0, 0)], -1.0);
    }

    #[test]
    fn axis_reflection() {
        let h = reflection_matrix(&Matrix::identity(2), &[1.0f64, 0.0]).unwrap();
        assert_eq!(h, Matrix::from_diag(&[-1.0, 1.0]));
    }

    #[test]
    fn reflector_properties_3d() {
        let a = Matrix::from_rows(&[&[2.0, 0.3, 0.1], &[0.3, 1.5, -0.2], &[0.1, -0.2, 1.0f64]]);
        let s = crate::linalg::sqrt_spd(&a).unwrap();
        let xi = [0.4, -1.2, 0.7];
        let h = reflection_matrix(&s, &xi).unwrap();
        let hh = h.transpose().matmul(&h).sub(&Matrix::identity(3));
        assert!(hh.max_abs() < 1e-12);
        let l = cholesky(&s).unwrap();
        let mut v = xi;
        cholesky_solve_in_place(&l, &mut v);
        let hv = h.mul_vec(&v);
        for i in 0..3 {
            assert!((hv[i] + v[i]).abs() < 1e-12 * norm(&v));
        }
        assert!(h.asymmetry() < 1e-15);
    }

    #[test]
    fn degenerate_direction_is_an_error() {
        let r = reflection_matrix(&Matrix::<f64>::identity(2), &[0.0, 0.0]);
        assert!(matches!(r, Err(CoreError::DegenerateDirection { .. })));
        let r = reflection_matrix(&Matrix::<f64>::identity(1), &[1e-320]);
        assert!(matches!(r, Err(CoreError::DegenerateDirection { .. })));
    }

    fn brownian() -> CoefficientField<f64> {
        builtin::constant(1, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn coincident_start_couples_at_zero() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let f = builtin::sin_perturbed(2, 0.5, 2.0, 0.3).unwrap();
        let rule = CouplingRule::default_for(&f, &grid);
        let cp = simulate_coupled(&f, &[0.2, 0.1], &[0.2, 0.1], grid, &mut RngStream::new(1, 0, 2), rule).unwrap();
        assert_eq!(cp.tau_index, Some(0));
        assert_eq!(cp.tau_time, 0.0);
        assert_eq!(cp.path_x, cp.path_z);
    }

    #[test]
    fn brownian_separation_moves_by_twice_the_increment() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let rule = CouplingRule::tolerance_only(0.0);
        let cp = simulate_coupled(&brownian(), &[0.0], &[5.0], grid, &mut RngStream::new(3, 0, 1), rule).unwrap();
        let mut rng = RngStream::new(3, 0, 1);
        let sd = grid.dt().sqrt();
        let end = cp.tau_index.unwrap_or(100);
        for k in 0..end {
            let db = sd * rng.next_step().normals[0];
            let before = cp.path_x.state(k)[0] - cp.path_z.state(k)[0];
            let after = cp.path_x.state(k + 1)[0] - cp.path_z.state(k + 1)[0];
            assert!((after - (before + 2.0 * db)).abs() < 1e-12);
        }
    }

    #[test]
    fn paths_are_fused_after_coupling() {
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let f = builtin::sin_perturbed(2, 0.5, 2.0, 0.2).unwrap();
        let rule = CouplingRule::default_for(&f, &grid);
        let mut coupled = 0;
        for idx in 0..40 {
            let cp = simulate_coupled(
                &f,
                &[0.0, 0.0],
                &[0.05, 0.02],
                grid,
                &mut RngStream::new(8, idx, 2),
                rule,
            )
            .unwrap();
            assert!(cp.tau_time >= 0.0 && cp.tau_time <= 1.0);
            if let Some(k) = cp.tau_index {
                coupled += 1;
                for j in k..cp.path_x.len() {
                    assert_eq!(cp.path_x.state(j), cp.path_z.state(j));
                }
                assert_eq!(cp.tau_time, grid.time(k));
            }
        }
        assert!(coupled > 20);
    }

    #[test]
    fn sign_change_detection_couples_on_crossing() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let rule = CouplingRule {
            tol: 0.0,
            crossing: CrossingCheck::SignChange,
        };
        for idx in 0..50 {
            let cp = simulate_coupled(&brownian(), &[0.0], &[0.1], grid, &mut RngStream::new(4, idx, 1), rule).unwrap();
            let end = cp.tau_index.unwrap_or(cp.path_x.len());
            for k in 0..end {
                assert!(cp.path_z.state(k)[0] - cp.path_x.state(k)[0] > 0.0);
            }
        }
    }

    #[test]
    fn identical_points_have_zero_expected_coupling_time() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let f = brownian();
        let rule = CouplingRule::default_for(&f, &grid);
        let e = coupling_time_expectation(&f, &[0.3], &[0.3], 1.0, grid, PathBlock::new(1, 100), rule).unwrap();
        assert_eq!(e.tau.mean, 0.0);
        assert_eq!(e.tau.stderr, 0.0);
        assert_eq!(e.fraction_coupled, 1.0);
    }

    #[test]
    fn lyapunov_zero_modulus_is_identity() {
        let p = LyapunovParams::new(1.3, ModulusOfContinuity::zero()).unwrap();
        for eta in [0.0, 0.5, 7.0] {
            assert!((lyapunov_f(&p, eta).unwrap() - eta).abs() <= 1e-15 * eta.max(1.0));
        }
    }

    #[test]
    fn lyapunov_linear_modulus_closed_form() {
        let p = LyapunovParams::new(1.0, ModulusOfContinuity::power(1.0, 1.0).unwrap()).unwrap();
        for eta in [0.1f64, 1.0, 10.0] {
            let want = (1.0 - (-2.0 * eta).exp()) / 2.0;
            let got = lyapunov_f(&p, eta).unwrap();
            assert!(((got - want) / want).abs() <= 1e-8, "{eta}: {got} vs {want}");
        }
    }

    #[test]
    fn lyapunov_rejects_non_dini_modulus() {
        let p = LyapunovParams::new(1.0, ModulusOfContinuity::log_power(1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(lyapunov_f(&p, 0.5), Err(CoreError::Divergence(_))));
        assert!(LyapunovParams::new(0.0, ModulusOfContinuity::zero()).is_err());
    }
}
