//! Feynman–Kac Monte Carlo for `u(T, x) = E[f(X_T) exp(∫_0^T c(T-s, X_s) ds)]`
//! and coupled estimates of `u(T, x) - u(T, z)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::analysis::{fit_log_corrected, fit_power_law, ScalingFit};
use crate::coefficients::{classify_dini, CoefficientField, DiniClass};
use crate::coupling::{run_coupled, unit_direction, CouplingRule, PathBlock};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, RngStream};
use crate::scalar::{lit, Real};
use crate::sde::{map_paths, simulate_with, TimeGrid};
use crate::stats::Estimate;

pub type TerminalFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Terminal data `f` with a declared sup-norm (infinite for unbounded data).
#[derive(Clone)]
pub struct Terminal<T> {
    name: String,
    sup_norm: T,
    f: TerminalFn<T>,
}

impl<T: Real> fmt::Debug for Terminal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Terminal")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl<T: Real> Terminal<T> {
    pub fn new(name: impl Into<String>, sup_norm: T, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            sup_norm,
            f: Arc::new(f),
        }
    }

    /// `f ≡ value`.
    pub fn constant(value: T) -> Self {
        Self::new("one", value.abs(), move |_| value)
    }

    /// `amp · exp(-|y - center|² / (2 width²))`.
    pub fn gaussian(amp: T, center: Vec<T>, width: T) -> Self {
        let denom = lit::<T>(2.0) * width * width;
        Self::new("gaussian", amp.abs(), move |y: &[T]| {
            let d2 = y
                .iter()
                .zip(&center)
                .fold(T::zero(), |acc, (&a, &c)| acc + (a - c) * (a - c));
            amp * (-d2 / denom).exp()
        })
    }

    /// `slope · y₁`; unbounded, so its declared sup-norm is infinite.
    pub fn linear(slope: T) -> Self {
        Self::new("linear", T::infinity(), move |y: &[T]| slope * y[0])
    }

    /// `κ · f`.
    pub fn scaled(&self, kappa: T) -> Self {
        let inner = self.f.clone();
        Self::new(
            format!("{}*{kappa}", self.name),
            self.sup_norm * kappa.abs(),
            move |y| kappa * inner(y),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_norm(&self) -> T {
        self.sup_norm
    }

    #[inline]
    pub fn eval(&self, y: &[T]) -> T {
        (self.f)(y)
    }
}

/// Everything needed to estimate `u(T, x)`.
#[derive(Debug, Clone)]
pub struct SolveRequest<T: Real> {
    pub field: CoefficientField<T>,
    pub terminal: Terminal<T>,
    pub grid: TimeGrid<T>,
    pub eval_point: Vec<T>,
    pub block: PathBlock,
}

impl<T: Real> SolveRequest<T> {
    /// Checks dimensions, the path count and the declared sup-norm of `f` on
    /// 201 points per axis through the evaluation point.
    pub fn validate(&self) -> Result<()> {
        self.block.validate()?;
        let d = self.field.dim();
        if self.eval_point.len() != d {
            return invalid(format!(
                "evaluation point has dimension {}, field has {d}",
                self.eval_point.len()
            ));
        }
        let sup = self.terminal.sup_norm();
        let mut y = self.eval_point.clone();
        for axis in 0..d {
            for k in 0..=200 {
                y[axis] = self.eval_point[axis] + lit::<T>(k as f64 / 10.0 - 10.0);
                let v = self.terminal.eval(&y);
                if !(v.abs() <= sup + lit(1e-9)) {
                    return invalid(format!(
                        "|f| = {} exceeds its declared sup-norm {sup} at {y:?}",
                        v.abs()
                    ));
                }
            }
            y[axis] = self.eval_point[axis];
        }
        Ok(())
    }

    fn sample(&self, x: &[T], seed: u64, idx: u64) -> Result<T> {
        let mut rng = RngStream::new(seed, idx, self.field.dim());
        let p = simulate_with(&self.field, x, self.grid, &mut rng, |_, _, _, _| {})?;
        Ok(self.terminal.eval(&p.x) * p.exponent().exp())
    }
}

/// Mean and standard error of `f(X_T) exp(∫c)` over the request's path block.
pub fn solve_u<T: Real>(req: &SolveRequest<T>) -> Result<Estimate<T>> {
    req.validate()?;
    let b = req.block;
    let values = map_paths(b.n_paths, b.first_index, |idx| req.sample(&req.eval_point, b.seed, idx))?;
    Ok(Estimate::from_samples(&values))
}

/// Coupled estimate of `u(T, x) - u(T, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledDifference<T> {
    pub delta: Estimate<T>,
    /// `T ∧ τ` over the same pairs.
    pub tau: Estimate<T>,
    pub fraction_coupled: T,
}

/// Averages `f(X_T) e^{∫c(X)} - f(Z_T) e^{∫c(Z)}` over reflection-coupled pairs.
pub fn solve_difference_coupled<T: Real>(
    req: &SolveRequest<T>,
    z: &[T],
    rule: CouplingRule<T>,
) -> Result<CoupledDifference<T>> {
    req.validate()?;
    let b = req.block;
    let grid = req.grid;
    let samples = map_paths(b.n_paths, b.first_index, |idx| {
        let mut rng = RngStream::new(b.seed, idx, req.field.dim());
        let out = run_coupled(
            &req.field,
            &req.eval_point,
            z,
            grid,
            &mut rng,
            rule,
            grid.steps(),
            false,
            |_, _| {},
        )?;
        let fx = req.terminal.eval(&out.x.x) * out.x.exponent().exp();
        let fz = req.terminal.eval(&out.z.x) * out.z.exponent().exp();
        let tau = out.tau_index.map_or(grid.horizon(), |k| grid.time(k));
        Ok((fx - fz, tau, out.tau_index.is_some()))
    })?;
    let deltas: Vec<T> = samples.iter().map(|s| s.0).collect();
    let taus: Vec<T> = samples.iter().map(|s| s.1).collect();
    let coupled = samples.iter().filter(|s| s.2).count();
    Ok(CoupledDifference {
        delta: Estimate::from_samples(&deltas),
        tau: Estimate::from_samples(&taus),
        fraction_coupled: lit::<T>(coupled as f64) / lit(samples.len() as f64),
    })
}

/// `u(T, x) - u(T, z)` from two independent runs: `x` with seed
/// `derive_seed(seed, 1)` and `z` with `derive_seed(seed, 2)`.
pub fn solve_difference_independent<T: Real>(req: &SolveRequest<T>, z: &[T]) -> Result<Estimate<T>> {
    req.validate()?;
    let b = req.block;
    let (sx, sz) = (derive_seed(b.seed, 1), derive_seed(b.seed, 2));
    let ux = map_paths(b.n_paths, b.first_index, |idx| req.sample(&req.eval_point, sx, idx))?;
    let uz = map_paths(b.n_paths, b.first_index, |idx| req.sample(z, sz, idx))?;
    let (ex, ez) = (Estimate::from_samples(&ux), Estimate::from_samples(&uz));
    Ok(Estimate {
        mean: ex.mean - ez.mean,
        stderr: (ex.stderr * ex.stderr + ez.stderr * ez.stderr).sqrt(),
        n: b.n_paths,
    })
}

/// Declarative description of a modulus-of-continuity experiment.
#[derive(Debug, Clone)]
pub struct ModulusExperimentConfig<T: Real> {
    pub field: CoefficientField<T>,
    pub terminal: Terminal<T>,
    pub base_point: Vec<T>,
    pub direction: Vec<T>,
    /// Strictly decreasing positive distances.
    pub ladder: Vec<T>,
    pub grid: TimeGrid<T>,
    /// Intermediate time `s ∈ (0, T)`; reported only.
    pub intermediate_time: T,
    pub p: f64,
    pub p_star: f64,
    pub epsilon: f64,
    pub block: PathBlock,
    pub rule: CouplingRule<T>,
    /// Also run the independent-difference estimator at each distance.
    pub compare_independent: bool,
}

impl<T: Real> ModulusExperimentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        validate_ladder(&self.ladder)?;
        let horizon = self.grid.horizon();
        if !(self.intermediate_time > T::zero() && self.intermediate_time < horizon) {
            return invalid(format!("intermediate time must lie in (0, {horizon})"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return invalid(format!("p must lie in [1, inf), got {}", self.p));
        }
        let conj = 1.0 / self.p + 1.0 / self.p_star;
        if !(self.p_star > 1.0) || (conj - 1.0).abs() > 1e-12 {
            return invalid(format!("p = {} and p* = {} are not conjugate", self.p, self.p_star));
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.base_point.len() != self.field.dim() || self.direction.len() != self.field.dim() {
            return invalid("base point and direction must match the field dimension");
        }
        unit_direction(&self.direction)?;
        self.block.validate()
    }
}

/// Distances must be positive, finite and strictly decreasing.
pub fn validate_ladder<T: Real>(ladder: &[T]) -> Result<()> {
    if ladder.is_empty() {
        return invalid("distance ladder is empty");
    }
    if ladder.iter().any(|r| !(*r > T::zero() && r.is_finite())) {
        return invalid("distances must be positive and finite");
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("distances must be strictly decreasing");
    }
    Ok(())
}

/// Regularity regime implied by the declared modulus of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Continuous only: Hölder exponent `1 - ε` expected.
    Continuous,
    /// Dini continuous: Lipschitz expected.
    Dini,
}

impl Regime {
    pub fn expectation(&self) -> &'static str {
        match self {
            Regime::Continuous => "slope >= 1 - epsilon",
            Regime::Dini => "slope ~ 1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusRow<T> {
    pub distance: T,
    pub delta_u: T,
    pub stderr_u: T,
    pub tau_mean: T,
    pub stderr_tau: T,
    pub n_paths: usize,
    pub dt: T,
    pub couple_tol: T,
    /// Independent-difference estimate and its standard error, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independent: Option<(T, T)>,
}

pub const MODULUS_CSV_HEADER: &str = "distance,delta_u,stderr_u,tau_mean,stderr_tau,n_paths,dt,couple_tol";

impl<T: Real> ModulusRow<T> {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.distance,
            self.delta_u,
            self.stderr_u,
            self.tau_mean,
            self.stderr_tau,
            self.n_paths,
            self.dt,
            self.couple_tol
        )
    }
}

/// Rows plus the fitted exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable<T> {
    pub rows: Vec<ModulusRow<T>>,
    pub regime: Regime,
    /// Fit of `|Δu|` against `r`.
    pub delta_fit: Option<ScalingFit<T>>,
    /// Fit of `|Δu|` against `r·max{1, -log r}`.
    pub delta_fit_log_corrected: Option<ScalingFit<T>>,
    /// Fit of `E[T ∧ τ]` against `r`.
    pub tau_fit: Option<ScalingFit<T>>,
    pub lipschitz_consistent: Option<bool>,
}

impl<T: Real> ResultTable<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(MODULUS_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }
}

/// Plain, log-corrected and coupling-time fits of a modulus table.
pub type ModulusFits<T> = (Option<ScalingFit<T>>, Option<ScalingFit<T>>, Option<ScalingFit<T>>);

/// Fits attached to a modulus table; a fit is omitted when its inputs are
/// not all positive or there are fewer than three rows.
pub fn fit_modulus_rows<T: Real>(rows: &[ModulusRow<T>]) -> ModulusFits<T> {
    let delta: Vec<(T, T)> = rows.iter().map(|r| (r.distance, r.delta_u.abs())).collect();
    let tau: Vec<(T, T)> = rows.iter().map(|r| (r.distance, r.tau_mean)).collect();
    (
        fit_power_law(&delta).ok(),
        fit_log_corrected(&delta).ok(),
        fit_power_law(&tau).ok(),
    )
}

/// Runs the coupled-difference estimator between `x` and `x + r·direction`
/// for every `r` in the ladder. Distance `i` uses path indices `[i·n, (i+1)·n)`.
pub fn modulus_experiment<T: Real>(cfg: &ModulusExperimentConfig<T>) -> Result<ResultTable<T>> {
    cfg.validate()?;
    let unit = unit_direction(&cfg.direction)?;
    let n = cfg.block.n_paths;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for (i, &r) in cfg.ladder.iter().enumerate() {
        let z: Vec<T> = cfg.base_point.iter().zip(&unit).map(|(&b, &u)| b + r * u).collect();
        let req = SolveRequest {
            field: cfg.field.clone(),
            terminal: cfg.terminal.clone(),
            grid: cfg.grid,
            eval_point: cfg.base_point.clone(),
            block: cfg.block.offset(cfg.block.first_index + (i * n) as u64),
        };
        let d = solve_difference_coupled(&req, &z, cfg.rule)?;
        let independent = if cfg.compare_independent {
            let e = solve_difference_independent(&req, &z)?;
            Some((e.mean, e.stderr))
        } else {
            None
        };
        rows.push(ModulusRow {
            distance: r,
            delta_u: d.delta.mean,
            stderr_u: d.delta.stderr,
            tau_mean: d.tau.mean,
            stderr_tau: d.tau.stderr,
            n_paths: n,
            dt: cfg.grid.dt(),
            couple_tol: cfg.rule.tol,
            independent,
        });
    }
    let regime = match classify_dini(cfg.field.modulus())?.class {
        DiniClass::Dini => Regime::Dini,
        DiniClass::NotDiniAtResolution => Regime::Continuous,
    };
    let (delta_fit, delta_fit_log_corrected, tau_fit) = fit_modulus_rows(&rows);
    let lipschitz_consistent = delta_fit.map(|f| f.consistent_with_lipschitz());
    Ok(ResultTable {
        rows,
        regime,
        delta_fit,
        delta_fit_log_corrected,
        tau_fit,
        lipschitz_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin;

    fn request(field: CoefficientField<f64>, terminal: Terminal<f64>, x: f64, n: usize) -> SolveRequest<f64> {
        SolveRequest {
            field,
            terminal,
            grid: TimeGrid::new(1.0, 100).unwrap(),
            eval_point: vec![x],
            block: PathBlock::new(17, n),
        }
    }

    #[test]
    fn constant_payoff_with_constant_potential() {
        let kappa = 0.3;
        let req = request(
            builtin::constant(1, 1.0, 0.0, kappa).unwrap(),
            Terminal::constant(1.0),
            0.0,
            500,
        );
        let e = solve_u(&req).unwrap();
        assert!((e.mean / kappa.exp() - 1.0).abs() < 1e-14);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn scaling_terminal_scales_estimate() {
        let base = request(
            builtin::sin_perturbed(1, 0.5, 2.0, 0.0).unwrap(),
            Terminal::gaussian(1.0, vec![0.0], 1.0),
            0.3,
            400,
        );
        let e1 = solve_u(&base).unwrap();
        let kappa = 4.0;
        let scaled = SolveRequest {
            terminal: base.terminal.scaled(kappa),
            ..base.clone()
        };
        let e2 = solve_u(&scaled).unwrap();
        assert_eq!(e2.mean, kappa * e1.mean);
        assert_eq!(e2.stderr, kappa * e1.stderr);
    }

    #[test]
    fn coincident_points_give_zero_difference() {
        let req = request(
            builtin::sin_perturbed(1, 0.5, 2.0, 0.4).unwrap(),
            Terminal::gaussian(1.0, vec![0.0], 1.0),
            0.3,
            200,
        );
        let rule = CouplingRule::default_for(&req.field, &req.grid);
        let d = solve_difference_coupled(&req, &[0.3], rule).unwrap();
        assert_eq!(d.delta.mean, 0.0);
        assert_eq!(d.delta.stderr, 0.0);
    }

    #[test]
    fn coupled_paths_without_potential_cancel_exactly() {
        let req = request(
            builtin::sin_perturbed(1, 0.5, 2.0, 0.0).unwrap(),
            Terminal::gaussian(1.0, vec![0.0], 1.0),
            0.3,
            300,
        );
        let rule = CouplingRule::default_for(&req.field, &req.grid);
        let grid = req.grid;
        for idx in 0..300 {
            let mut rng = RngStream::new(17, idx, 1);
            let out = run_coupled(
                &req.field,
                &[0.3],
                &[0.35],
                grid,
                &mut rng,
                rule,
                grid.steps(),
                false,
                |_, _| {},
            )
            .unwrap();
            if out.tau_index.is_some() {
                let fx = req.terminal.eval(&out.x.x) * out.x.exponent().exp();
                let fz = req.terminal.eval(&out.z.x) * out.z.exponent().exp();
                assert_eq!(fx - fz, 0.0);
            }
        }
    }

    #[test]
    fn request_validation() {
        let mut req = request(
            builtin::constant(1, 1.0, 0.0, 0.0).unwrap(),
            Terminal::constant(1.0),
            0.0,
            1,
        );
        assert!(req.validate().is_err());
        req.block.n_paths = 10;
        req.eval_point = vec![0.0, 0.0];
        assert!(req.validate().is_err());
        req.eval_point = vec![0.0];
        req.terminal = Terminal::new("liar", 0.5, |_: &[f64]| 1.0);
        assert!(req.validate().is_err());
        req.terminal = Terminal::linear(1.0);
        assert!(req.validate().is_ok());
    }

    #[test]
    fn ladder_validation() {
        assert!(validate_ladder(&[0.2, 0.1, 0.05]).is_ok());
        assert!(validate_ladder(&[0.2, 0.2]).is_err());
        assert!(validate_ladder(&[0.1, 0.2]).is_err());
        assert!(validate_ladder(&[0.1, -0.2]).is_err());
        assert!(validate_ladder::<f64>(&[]).is_err());
    }

    #[test]
    fn linear_terminal_difference_equals_distance() {
        let field = builtin::constant(1, 1.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::<f64>::new(1.0, 200).unwrap();
        let cfg = ModulusExperimentConfig {
            rule: CouplingRule::default_for(&field, &grid),
            field,
            terminal: Terminal::linear(1.0),
            base_point: vec![0.4],
            direction: vec![-1.0],
            ladder: vec![0.2, 0.1, 0.05, 0.025],
            grid,
            intermediate_time: 0.5,
            p: 1.0,
            p_star: f64::INFINITY,
            epsilon: 0.1,
            block: PathBlock::new(5, 20000),
            compare_independent: false,
        };
        let table = modulus_experiment(&cfg).unwrap();
        for row in &table.rows {
            // Δu = u(x) - u(x - r) = r.
            assert!(
                (row.delta_u - row.distance).abs() <= 4.0 * row.stderr_u + 1e-12,
                "{row:?}"
            );
        }
        let fit = table.delta_fit.unwrap();
        assert!((fit.slope - 1.0).abs() < 3.0 * fit.slope_stderr + 0.05, "{fit:?}");
        assert_eq!(table.regime, Regime::Dini);
        let csv = table.to_csv();
        assert!(csv.starts_with(MODULUS_CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn experiment_config_validation() {
        let field = builtin::constant(1, 1.0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let good = ModulusExperimentConfig {
            rule: CouplingRule::default_for(&field, &grid),
            field,
            terminal: Terminal::constant(1.0),
            base_point: vec![0.0],
            direction: vec![1.0],
            ladder: vec![0.1, 0.05, 0.025],
            grid,
            intermediate_time: 0.5,
            p: 2.0,
            p_star: 2.0,
            epsilon: 0.1,
            block: PathBlock::new(1, 10),
            compare_independent: false,
        };
        assert!(good.validate().is_ok());
        assert!(ModulusExperimentConfig {
            p_star: 3.0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(ModulusExperimentConfig {
            intermediate_time: 1.0,
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(ModulusExperimentConfig {
            direction: vec![0.0],
            ..good.clone()
        }
        .validate()
        .is_err());
        assert!(ModulusExperimentConfig {
            ladder: vec![0.1, 0.2, 0.05],
            ..good
        }
        .validate()
        .is_err());
    }
}
