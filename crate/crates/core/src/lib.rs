//! Monte Carlo solver for non-divergence parabolic equations built on the
//! Feynman–Kac representation, with reflection coupling of two diffusions
//! started at nearby points and the closed-form references used to check it.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the scalar.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coefficients;
pub mod coupling;
pub mod error;
pub mod fk_solver;
pub mod linalg;
pub mod oracles;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use analysis::{fit_log_corrected, fit_power_law, fit_power_law_weighted, ScalingFit, LIPSCHITZ_BAND};
pub use coefficients::{
    builtin, classify_dini, dini_integral, validate_field, CoefficientField, DiniClass, DiniReport, ModulusKind,
    ModulusOfContinuity, Sampler, ValidationReport,
};
pub use coupling::{
    coupling_ladder, coupling_time_expectation, lyapunov_f, reflection_matrix, run_coupled, simulate_coupled,
    CoupledOutcome, CoupledPath, CouplingEstimate, CouplingRow, CouplingRule, CrossingCheck, LyapunovParams, PathBlock,
    COUPLING_CSV_HEADER,
};
pub use error::{CoreError, Result};
pub use fk_solver::{
    modulus_experiment, solve_difference_coupled, solve_difference_independent, solve_u, validate_ladder,
    CoupledDifference, ModulusExperimentConfig, ModulusFits, ModulusRow, Regime, ResultTable, SolveRequest, Terminal,
    MODULUS_CSV_HEADER,
};
pub use linalg::{sqrt_spd, symmetric_eigen, Matrix, MAX_DIM};
pub use oracles::{
    bm_coupling_expectation, gaussian_density_1d, heat_kernel, normal_cdf, running_max_bounds, sgn_drift_density,
    RunningMaxBounds, RunningMaxQuery, SgnDriftQuery,
};
pub use rng::{derive_seed, RngStream};
pub use scalar::Real;
pub use sde::{
    feynman_kac_weight, map_paths, running_max_exceedance, simulate_path, simulate_path_with, simulate_with,
    write_paths_csv, NoiseSource, Particle, SamplePath, TimeGrid,
};
pub use stats::{pairwise_sum, CompensatedSum, Estimate};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type CoefficientField64 = CoefficientField<f64>;
pub type CoefficientField32 = CoefficientField<f32>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type CouplingRule64 = CouplingRule<f64>;
pub type CouplingRule32 = CouplingRule<f32>;
pub type Terminal64 = Terminal<f64>;
pub type Terminal32 = Terminal<f32>;
pub type SolveRequest64 = SolveRequest<f64>;
pub type Estimate64 = Estimate<f64>;
pub type ScalingFit64 = ScalingFit<f64>;
pub type ResultTable64 = ResultTable<f64>;
