//! Executes a resolved configuration and persists its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fkcouple_core::{
    classify_dini, coupling_ladder, fit_power_law, map_paths, modulus_experiment, simulate_path, solve_u,
    validate_field, write_paths_csv, ModulusExperimentConfig, PathBlock, RngStream, Sampler, ScalingFit, SolveRequest,
    COUPLING_CSV_HEADER,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{CliError, Result};
use crate::{oracle, registry, VERSION};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "FKCOUPLE_OUT";

/// In-memory result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    /// Fitted exponents and other derived quantities for summary.json.
    pub fits: Value,
    /// Optional paths.csv content.
    pub paths_csv: Option<String>,
}

pub fn fit_json(fit: &Option<ScalingFit<f64>>) -> Value {
    match fit {
        None => Value::Null,
        Some(f) => {
            let (lo, hi) = f.slope_interval(1.96);
            json!({
                "slope": f.slope,
                "intercept": f.intercept,
                "slope_stderr": f.slope_stderr,
                "slope_ci95": [lo, hi],
                "r_squared": f.r_squared,
                "n_points": f.n_points,
                "consistent_with_lipschitz": f.consistent_with_lipschitz(),
            })
        }
    }
}

/// Runs `cfg` (already resolved) on the configured number of workers.
pub fn compute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    if cfg.workers == 0 {
        return compute_inner(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| compute_inner(cfg))
}

fn compute_inner(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = match cfg.kind {
        Kind::Oracle => oracle::table(cfg.oracle.as_ref().expect("resolved oracle section"))?,
        Kind::Couple => couple(cfg)?,
        Kind::Solve => solve(cfg)?,
        Kind::Modulus => modulus(cfg)?,
        Kind::Validate => validate(cfg)?,
    };
    if cfg.output.dump_paths > 0 && cfg.kind != Kind::Oracle {
        art.paths_csv = Some(dump_paths(cfg)?);
    }
    Ok(art)
}

fn couple(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let field = registry::build_field(cfg)?;
    let grid = cfg.grid()?;
    let e = &cfg.experiment;
    let ladder = e.ladder.as_deref().unwrap_or_default();
    let rows = coupling_ladder(
        &field,
        e.base_point.as_deref().unwrap_or_default(),
        e.direction.as_deref().unwrap_or_default(),
        ladder,
        grid.horizon(),
        grid,
        PathBlock::new(cfg.seed, cfg.n_paths),
        cfg.coupling_rule(),
    )?;
    let mut csv = format!("{COUPLING_CSV_HEADER}\n");
    for r in &rows {
        writeln!(csv, "{}", r.csv_line()).unwrap();
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.distance, r.mean_tau_capped)).collect();
    let fits = json!({ "tau_fit": fit_json(&fit_power_law(&pairs).ok()) });
    Ok(Artifacts {
        csv,
        fits,
        paths_csv: None,
    })
}

fn solve(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let field = registry::build_field(cfg)?;
    let terminal = registry::build_terminal(cfg)?;
    let grid = cfg.grid()?;
    let d = cfg.dim();
    let mut csv = String::new();
    for k in 1..=d {
        write!(csv, "x_{k},").unwrap();
    }
    csv.push_str("estimate,stderr,n_paths,dt\n");
    let points = cfg.experiment.points.as_deref().unwrap_or_default();
    for (i, x) in points.iter().enumerate() {
        let req = SolveRequest {
            field: field.clone(),
            terminal: terminal.clone(),
            grid,
            eval_point: x.clone(),
            block: PathBlock::new(cfg.seed, cfg.n_paths).offset((i * cfg.n_paths) as u64),
        };
        let u = solve_u(&req)?;
        for v in x {
            write!(csv, "{v},").unwrap();
        }
        writeln!(csv, "{},{},{},{}", u.mean, u.stderr, u.n, grid.dt()).unwrap();
    }
    Ok(Artifacts {
        csv,
        fits: Value::Null,
        paths_csv: None,
    })
}

fn modulus(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let e = &cfg.experiment;
    let p = e.p.unwrap_or(1.0);
    let p_star = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let mc = ModulusExperimentConfig {
        field: registry::build_field(cfg)?,
        terminal: registry::build_terminal(cfg)?,
        base_point: e.base_point.clone().unwrap_or_default(),
        direction: e.direction.clone().unwrap_or_default(),
        ladder: e.ladder.clone().unwrap_or_default(),
        grid: cfg.grid()?,
        intermediate_time: e.intermediate_time.unwrap_or(cfg.grid.horizon / 2.0),
        p,
        p_star,
        epsilon: e.epsilon.unwrap_or(0.1),
        block: PathBlock::new(cfg.seed, cfg.n_paths),
        rule: cfg.coupling_rule(),
        compare_independent: e.compare_independent.unwrap_or(false),
    };
    let table = modulus_experiment(&mc)?;
    let dini = classify_dini(mc.field.modulus())?;
    let independent: Vec<Value> = table
        .rows
        .iter()
        .filter_map(|r| {
            r.independent
                .map(|(m, s)| json!({ "distance": r.distance, "delta_u": m, "stderr_u": s }))
        })
        .collect();
    let fits = json!({
        "delta_fit": fit_json(&table.delta_fit),
        "delta_fit_log_corrected": fit_json(&table.delta_fit_log_corrected),
        "tau_fit": fit_json(&table.tau_fit),
        "regime": table.regime,
        "regime_expectation": table.regime.expectation(),
        "lipschitz_consistent": table.lipschitz_consistent,
        "dini": { "class": dini.class, "final_relative_change": dini.final_relative_change },
        "p": p,
        "p_star": if p_star.is_finite() { json!(p_star) } else { json!("inf") },
        "epsilon": mc.epsilon,
        "intermediate_time": mc.intermediate_time,
        "independent": independent,
    });
    Ok(Artifacts {
        csv: table.to_csv(),
        fits,
        paths_csv: None,
    })
}

fn validate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let field = registry::build_field(cfg)?;
    let [lo, hi] = cfg.experiment.sample_box.unwrap_or([-5.0, 5.0]);
    let sampler = Sampler::default_for(cfg.dim(), lo, hi, cfg.grid.horizon);
    let r = validate_field(&field, &sampler);
    let dini = classify_dini(field.modulus())?;
    let csv = format!(
        "n_samples,min_eigenvalue,max_eigenvalue,eigen_excursion,max_abs_b,max_abs_c,max_asymmetry,max_sigma_residual,passed\n{},{},{},{},{},{},{},{},{}\n",
        r.n_samples,
        r.min_eigenvalue,
        r.max_eigenvalue,
        r.eigen_excursion,
        r.max_abs_b,
        r.max_abs_c,
        r.max_asymmetry,
        r.max_sigma_residual,
        r.passed
    );
    let fits = json!({ "validation": r, "dini": dini });
    Ok(Artifacts {
        csv,
        fits,
        paths_csv: None,
    })
}

fn dump_paths(cfg: &ExperimentConfig) -> Result<String> {
    let field = registry::build_field(cfg)?;
    let grid = cfg.grid()?;
    let x0 = cfg
        .experiment
        .base_point
        .clone()
        .unwrap_or_else(|| vec![0.0; cfg.dim()]);
    let n = cfg.output.dump_paths.min(cfg.n_paths);
    let paths = map_paths(n, 0, |i| {
        simulate_path(&field, &x0, grid, &mut RngStream::new(cfg.seed, i, cfg.dim()))
    })?;
    let indexed: Vec<(u64, _)> = paths.iter().enumerate().map(|(i, p)| (i as u64, p)).collect();
    let mut buf = Vec::new();
    write_paths_csv(&mut buf, &indexed).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// Output root: the config's `output.dir`, then `$FKCOUPLE_OUT`, then `runs`.
pub fn output_root(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    if let Some(p) = override_dir {
        return p.to_path_buf();
    }
    if let Some(d) = &cfg.output.dir {
        return PathBuf::from(d);
    }
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Creates `<root>/<kind>-<UTC timestamp>-s<seed>`, adding a numeric
/// suffix if that directory already exists.
fn create_run_dir(root: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(CliError::io(root))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{}-{stamp}-s{}", cfg.kind.as_str(), cfg.seed);
    for attempt in 0u32.. {
        let name = if attempt == 0 {
            base.clone()
        } else {
            format!("{base}-{attempt}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Io { path: dir, source: e }),
        }
    }
    unreachable!()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(CliError::io(path))
}

/// Resolves, runs and persists one experiment; returns the run directory.
pub fn run(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> Result<PathBuf> {
    let resolved = cfg.resolve()?;
    let start = Instant::now();
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let art = compute(&resolved)?;
    let wall = start.elapsed().as_secs_f64();
    let dir = create_run_dir(&output_root(&resolved, override_dir), &resolved)?;
    write_file(&dir.join("results.csv"), &art.csv)?;
    if let Some(p) = &art.paths_csv {
        write_file(&dir.join("paths.csv"), p)?;
    }
    let summary = json!({
        "version": VERSION,
        "kind": resolved.kind,
        "seed": resolved.seed,
        "config": resolved,
        "fits": art.fits,
        "started_at": started_at,
        "wall_time_seconds": wall,
        "results": "results.csv",
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_file(&dir.join("summary.json"), &(text + "\n"))?;
    Ok(dir)
}
