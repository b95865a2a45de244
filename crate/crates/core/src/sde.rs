//! Euler–Maruyama simulation of the time-reversed diffusion
//! `dX_t = σ(T-t, X_t) dB_t + b(T-t, X_t) dt`, with the Feynman–Kac exponent
//! `∫_0^t c(T-s, X_s) ds` accumulated alongside.
//!
//! All coefficients and the exponent integrand are evaluated at the left
//! endpoint of each step.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::error::{invalid, CoreError, Result};
use crate::linalg::{Matrix, MAX_DIM};
use crate::rng::{RngStream, AUX_MAXIMUM, AUX_UNIFORMS};
use crate::scalar::{count, lit, Real};
use crate::stats::{CompensatedSum, Estimate};

/// Uniform grid `t_k = k·T/n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    horizon: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon > T::zero() && horizon.is_finite()) {
            return invalid(format!("horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return invalid("grid needs at least one step");
        }
        Ok(Self { horizon, steps })
    }

    /// Grid with step closest to `dt` (at least one step).
    pub fn with_step(horizon: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return invalid(format!("dt must be positive, got {dt}"));
        }
        let n = (horizon / dt).round().as_f64().max(1.0) as usize;
        Self::new(horizon, n)
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.horizon / count(self.steps)
    }

    /// `t_k`; `t_n` is exactly the horizon.
    #[inline]
    pub fn time(&self, k: usize) -> T {
        if k >= self.steps {
            self.horizon
        } else {
            self.horizon * count(k) / count(self.steps)
        }
    }

    /// Grid with twice as many steps over the same horizon.
    pub fn refined(&self) -> Self {
        Self {
            horizon: self.horizon,
            steps: self.steps * 2,
        }
    }
}

/// Source of Brownian increments `ΔB_k ~ N(0, dt·I)` and per-step auxiliary uniforms.
pub trait NoiseSource<T> {
    fn next_increment(&mut self, dt: T, db: &mut [T]) -> [f64; AUX_UNIFORMS];
}

impl<T: Real> NoiseSource<T> for RngStream {
    #[inline]
    fn next_increment(&mut self, dt: T, db: &mut [T]) -> [f64; AUX_UNIFORMS] {
        let draw = self.next_step();
        let scale = dt.sqrt();
        for (d, &z) in db.iter_mut().zip(&draw.normals) {
            *d = scale * lit(z);
        }
        draw.aux
    }
}

/// Sums consecutive blocks of `factor` increments from a finer source, so a
/// coarse grid sees the same Brownian path as the fine one.
pub struct Coarsened<S> {
    pub inner: S,
    pub factor: usize,
}

impl<T: Real, S: NoiseSource<T>> NoiseSource<T> for Coarsened<S> {
    fn next_increment(&mut self, dt: T, db: &mut [T]) -> [f64; AUX_UNIFORMS] {
        let fine_dt = dt / count(self.factor);
        let mut buf = [T::zero(); MAX_DIM];
        db.iter_mut().for_each(|v| *v = T::zero());
        let mut aux = [1.0; AUX_UNIFORMS];
        for _ in 0..self.factor {
            aux = self.inner.next_increment(fine_dt, &mut buf[..db.len()]);
            for (d, &b) in db.iter_mut().zip(&buf) {
                *d += b;
            }
        }
        aux
    }
}

/// Replays a fixed list of increments; aux uniforms are all one.
pub struct FixedIncrements<T> {
    pub increments: Vec<Vec<T>>,
    pub next: usize,
}

impl<T: Real> NoiseSource<T> for FixedIncrements<T> {
    fn next_increment(&mut self, _dt: T, db: &mut [T]) -> [f64; AUX_UNIFORMS] {
        db.copy_from_slice(&self.increments[self.next]);
        self.next += 1;
        [1.0; AUX_UNIFORMS]
    }
}

/// State of one particle: position and the running Feynman–Kac exponent.
#[derive(Debug, Clone)]
pub struct Particle<T> {
    pub x: Vec<T>,
    pub exponent: CompensatedSum<T>,
    drift: Vec<T>,
    diffusion: Vec<T>,
}

impl<T: Real> Particle<T> {
    pub fn new(x0: &[T]) -> Self {
        Self {
            x: x0.to_vec(),
            exponent: CompensatedSum::new(),
            drift: vec![T::zero(); x0.len()],
            diffusion: vec![T::zero(); x0.len()],
        }
    }

    #[inline]
    pub fn exponent(&self) -> T {
        self.exponent.value()
    }

    /// One Euler–Maruyama step from reversed time `s = T - t_k` with a
    /// precomputed `σ(s, x)` and increment `db`. Returns the exponent
    /// increment `c(s, x)·dt`.
    #[inline]
    pub fn advance(
        &mut self,
        field: &CoefficientField<T>,
        s: T,
        dt: T,
        sigma: &Matrix<T>,
        db: &[T],
        step: usize,
    ) -> Result<T> {
        let c = field.potential(s, &self.x);
        field.drift_into(s, &self.x, &mut self.drift);
        sigma.mul_vec_into(db, &mut self.diffusion);
        for i in 0..self.x.len() {
            self.x[i] += self.diffusion[i] + self.drift[i] * dt;
        }
        let increment = c * dt;
        self.exponent.add(increment);
        self.check(step + 1)?;
        Ok(increment)
    }

    #[inline]
    pub(crate) fn check(&self, step: usize) -> Result<()> {
        if self.x.iter().all(|v| v.is_finite()) && self.exponent.value().is_finite() {
            Ok(())
        } else {
            Err(CoreError::Diverged {
                step,
                detail: format!("state {:?}", self.x),
            })
        }
    }
}

/// A discretised trajectory `X_0..X_n` with the exponent at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<T> {
    pub grid: TimeGrid<T>,
    pub dim: usize,
    /// Row-major `(n+1) × dim`.
    pub states: Vec<T>,
    /// `Σ_{j<k} c(T - t_j, X_j)·dt` at node `k`.
    pub weight_log: Vec<T>,
}

impl<T: Real> SamplePath<T> {
    pub(crate) fn start(grid: TimeGrid<T>, x0: &[T]) -> Self {
        let n = grid.steps();
        let mut states = Vec::with_capacity((n + 1) * x0.len());
        states.extend_from_slice(x0);
        let mut weight_log = Vec::with_capacity(n + 1);
        weight_log.push(T::zero());
        Self {
            grid,
            dim: x0.len(),
            states,
            weight_log,
        }
    }

    pub(crate) fn push(&mut self, p: &Particle<T>) {
        self.states.extend_from_slice(&p.x);
        self.weight_log.push(p.exponent());
    }

    /// Number of nodes (`n + 1`).
    pub fn len(&self) -> usize {
        self.weight_log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight_log.is_empty()
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    pub fn final_weight_log(&self) -> T {
        self.weight_log[self.len() - 1]
    }
}

fn check_start<T: Real>(field: &CoefficientField<T>, x0: &[T]) -> Result<()> {
    if x0.len() != field.dim() {
        return invalid(format!(
            "start point has dimension {}, field has {}",
            x0.len(),
            field.dim()
        ));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return invalid("start point is not finite");
    }
    Ok(())
}

/// Simulates one path driven by `noise`, calling `observe` after every step
/// with the step index, the particle and the auxiliary uniforms.
pub fn simulate_with<T: Real, N: NoiseSource<T>>(
    field: &CoefficientField<T>,
    x0: &[T],
    grid: TimeGrid<T>,
    noise: &mut N,
    mut observe: impl FnMut(usize, &Particle<T>, &[T], [f64; AUX_UNIFORMS]),
) -> Result<Particle<T>> {
    check_start(field, x0)?;
    let dt = grid.dt();
    let horizon = grid.horizon();
    let mut p = Particle::new(x0);
    let mut db = vec![T::zero(); x0.len()];
    let mut prev = x0.to_vec();
    for k in 0..grid.steps() {
        let s = horizon - grid.time(k);
        let aux = noise.next_increment(dt, &mut db);
        let sigma = field.sigma(s, &p.x)?;
        prev.copy_from_slice(&p.x);
        p.advance(field, s, dt, &sigma, &db, k)?;
        observe(k, &p, &prev, aux);
    }
    Ok(p)
}

/// Simulates and records one path.
pub fn simulate_path<T: Real>(
    field: &CoefficientField<T>,
    x0: &[T],
    grid: TimeGrid<T>,
    rng: &mut RngStream,
) -> Result<SamplePath<T>> {
    simulate_path_with(field, x0, grid, rng)
}

pub fn simulate_path_with<T: Real, N: NoiseSource<T>>(
    field: &CoefficientField<T>,
    x0: &[T],
    grid: TimeGrid<T>,
    noise: &mut N,
) -> Result<SamplePath<T>> {
    let mut path = SamplePath::start(grid, x0);
    simulate_with(field, x0, grid, noise, |_, p, _, _| path.push(p))?;
    Ok(path)
}

/// `exp(∫_0^T c(T-s, X_s) ds)` for a completed path.
pub fn feynman_kac_weight<T: Real>(path: &SamplePath<T>) -> T {
    path.final_weight_log().exp()
}

/// Runs `f(path_index)` for `n` consecutive path indices in parallel and
/// returns the results in path-index order.
pub fn map_paths<R, F>(n: usize, first_index: u64, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64) -> Result<R> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| f(first_index + i as u64))
        .collect()
}

/// Monte Carlo estimate of `P(max_{s≤T} (X¹_s - X¹_0) ≥ level)` for each level.
///
/// With `bridge = true` the maximum inside each step is drawn exactly from
/// the Brownian-bridge law given the two endpoints (local variance `a₁₁`),
/// which removes the discrete-monitoring bias for constant coefficients.
pub fn running_max_exceedance<T: Real>(
    field: &CoefficientField<T>,
    x0: &[T],
    grid: TimeGrid<T>,
    levels: &[T],
    n_paths: usize,
    seed: u64,
    bridge: bool,
) -> Result<Vec<Estimate<T>>> {
    if n_paths < 2 {
        return invalid("need at least two paths");
    }
    let dt = grid.dt();
    let horizon = grid.horizon();
    let maxima = map_paths(n_paths, 0, |idx| {
        let mut rng = RngStream::new(seed, idx, field.dim());
        let origin = x0[0];
        let mut best = T::zero();
        simulate_with(field, x0, grid, &mut rng, |k, p, prev, aux| {
            let (u, v) = (prev[0] - origin, p.x[0] - origin);
            let mut m = u.max(v);
            if bridge {
                let s = horizon - grid.time(k);
                let q = field.a(s, prev)[(0, 0)];
                let ln_u: T = lit(libm::log(aux[AUX_MAXIMUM]));
                let disc = (v - u) * (v - u) - lit::<T>(2.0) * q * dt * ln_u;
                m = m.max((u + v + disc.sqrt()) / lit(2.0));
            }
            best = best.max(m);
        })?;
        Ok(best)
    })?;
    Ok(levels
        .iter()
        .map(|&level| {
            let hits: Vec<T> = maxima
                .iter()
                .map(|&m| if m >= level { T::one() } else { T::zero() })
                .collect();
            Estimate::from_samples(&hits)
        })
        .collect())
}

/// Writes paths as CSV with columns `path_index, step, t, x_1..x_d`.
pub fn write_paths_csv<T: Real, W: Write>(mut w: W, paths: &[(u64, &SamplePath<T>)]) -> io::Result<()> {
    let dim = paths.first().map_or(1, |p| p.1.dim);
    let mut header = String::from("path_index,step,t");
    for i in 1..=dim {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(w, "{header}")?;
    for (idx, path) in paths {
        for k in 0..path.len() {
            write!(w, "{idx},{k},{}", path.grid.time(k))?;
            for v in path.state(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
