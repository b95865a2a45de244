//! Experiment configuration: one TOML file (or the `config` object of a
//! previous run's summary.json) per experiment.

use std::collections::BTreeMap;
use std::path::Path;

use fkcouple_core::{validate_ladder, CouplingRule, CrossingCheck, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Couple,
    Solve,
    Modulus,
    Oracle,
    Validate,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Couple => "couple",
            Kind::Solve => "solve",
            Kind::Modulus => "modulus",
            Kind::Oracle => "oracle",
            Kind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Master seed; required, never derived from the clock.
    pub seed: u64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    /// Worker threads; 0 uses every core. Does not affect results.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub field: NamedSection,
    #[serde(default = "default_terminal")]
    pub terminal: NamedSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_n_paths() -> usize {
    10_000
}

fn default_terminal() -> NamedSection {
    NamedSection {
        name: "gaussian".into(),
        dim: None,
        params: BTreeMap::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}

fn default_steps() -> usize {
    1000
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: default_steps(),
        }
    }
}

/// A registry entry: name, optional dimension and numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for NamedSection {
    fn default() -> Self {
        Self {
            name: "constant".into(),
            dim: None,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    /// Evaluation points for `kind = "solve"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_independent: Option<bool>,
    /// Spatial box `[lo, hi]` sampled by `kind = "validate"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub crossing: CrossingCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleFamily {
    SgnDrift,
    Heat,
    RunningMax,
    BmCoupling,
}

/// Either an explicit list or `{ start, stop, count }` (inclusive, uniform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Values(ref v) if !v.is_empty() => Ok(v.clone()),
            Axis::Values(_) => Err(CliError::Config("oracle axis is empty".into())),
            Axis::Range { start, stop, count } => {
                if count == 0 || !(start.is_finite() && stop.is_finite()) {
                    return Err(CliError::Config(
                        "oracle range needs finite bounds and count >= 1".into(),
                    ));
                }
                if count == 1 {
                    return Ok(vec![start]);
                }
                let h = (stop - start) / (count - 1) as f64;
                Ok((0..count)
                    .map(|i| if i + 1 == count { stop } else { start + i as f64 * h })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub family: OracleFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<Axis>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Number of sample paths to dump to paths.csv (0 = none).
    #[serde(default)]
    pub dump_paths: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a TOML config, or the embedded `config` of a summary.json.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(cfg).map_err(|e| CliError::Config(e.to_string()))
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        Ok(TimeGrid::new(self.grid.horizon, self.grid.steps)?)
    }

    pub fn dim(&self) -> usize {
        self.field.dim.unwrap_or(1)
    }

    /// Checks names and values and fills every default, so the result
    /// serialises to a config that re-runs identically.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        if c.n_paths < 2 {
            return Err(CliError::Config(format!(
                "n_paths must be at least 2, got {}",
                c.n_paths
            )));
        }
        let grid = c.grid()?;
        let d = c.dim();
        if d == 0 || d > fkcouple_core::MAX_DIM {
            return Err(CliError::Config(format!(
                "dimension must lie in 1..={}",
                fkcouple_core::MAX_DIM
            )));
        }
        c.field.dim = Some(d);
        c.field.params = registry::resolve_params(registry::FIELDS, "field", &c.field.name, &c.field.params)?;
        c.terminal.dim = None;
        c.terminal.params =
            registry::resolve_params(registry::TERMINALS, "terminal", &c.terminal.name, &c.terminal.params)?;

        let e = &mut c.experiment;
        let base = e.base_point.get_or_insert_with(|| vec![0.0; d]);
        check_len("experiment.base_point", base, d)?;
        let dir = e.direction.get_or_insert_with(|| {
            let mut v = vec![0.0; d];
            v[0] = 1.0;
            v
        });
        check_len("experiment.direction", dir, d)?;
        if matches!(c.kind, Kind::Couple | Kind::Modulus) {
            let ladder = e
                .ladder
                .as_ref()
                .ok_or_else(|| CliError::Config("experiment.ladder is required".into()))?;
            validate_ladder(ladder).map_err(|err| CliError::InvalidLadder(err.to_string()))?;
        }
        if c.kind == Kind::Solve {
            let base = base.clone();
            let points = e.points.get_or_insert_with(|| vec![base]);
            if points.is_empty() {
                return Err(CliError::Config("experiment.points is empty".into()));
            }
            for p in points.iter() {
                check_len("experiment.points entry", p, d)?;
            }
        }
        if c.kind == Kind::Modulus {
            e.intermediate_time.get_or_insert(grid.horizon() / 2.0);
            e.p.get_or_insert(1.0);
            e.epsilon.get_or_insert(0.1);
            e.compare_independent.get_or_insert(false);
        }
        if c.kind == Kind::Validate {
            let b = e.sample_box.get_or_insert([-5.0, 5.0]);
            if !(b[0] < b[1]) {
                return Err(CliError::Config("experiment.sample_box must satisfy lo < hi".into()));
            }
        }
        if matches!(c.kind, Kind::Couple | Kind::Modulus) {
            let field = registry::build_field(&c)?;
            let tol = *c
                .coupling
                .tol
                .get_or_insert_with(|| CouplingRule::default_tol(&grid, field.lambda()));
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(CliError::Config(format!(
                    "coupling.tol must be finite and >= 0, got {tol}"
                )));
            }
        }
        if c.kind == Kind::Oracle {
            let o = c
                .oracle
                .as_mut()
                .ok_or_else(|| CliError::Config("kind = \"oracle\" needs an [oracle] section".into()))?;
            resolve_oracle(o)?;
        } else if c.oracle.is_some() {
            return Err(CliError::Config(
                "[oracle] section is only valid with kind = \"oracle\"".into(),
            ));
        }
        if c.kind != Kind::Oracle {
            registry::build_field(&c)?;
            registry::build_terminal(&c)?;
        }
        Ok(c)
    }

    pub fn coupling_rule(&self) -> CouplingRule<f64> {
        CouplingRule {
            tol: self.coupling.tol.unwrap_or(0.0),
            crossing: self.coupling.crossing,
        }
    }
}

fn check_len(what: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(CliError::Config(format!(
            "{what} has length {}, field dimension is {d}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{what} must be finite")));
    }
    Ok(())
}

fn resolve_oracle(o: &mut OracleSection) -> Result<()> {
    let need = |axis: &Option<Axis>, name: &str| -> Result<()> {
        match axis {
            Some(a) => a.values().map(|_| ()),
            None => Err(CliError::Config(format!("oracle.{name} is required for this family"))),
        }
    };
    match o.family {
        OracleFamily::SgnDrift => {
            o.theta.get_or_insert(1.0);
            for (a, n) in [(&o.t, "t"), (&o.x, "x"), (&o.y, "y")] {
                need(a, n)?;
            }
        }
        OracleFamily::Heat => {
            o.a0.get_or_insert(1.0);
            o.b0.get_or_insert(0.0);
            for (a, n) in [(&o.t, "t"), (&o.x, "x"), (&o.y, "y")] {
                need(a, n)?;
            }
        }
        OracleFamily::RunningMax => {
            o.c1.get_or_insert(1.0);
            o.c2.get_or_insert(1.0);
            for (a, n) in [(&o.t, "t"), (&o.x, "x")] {
                need(a, n)?;
            }
        }
        OracleFamily::BmCoupling => {
            for (a, n) in [(&o.t, "t"), (&o.d0, "d0")] {
                need(a, n)?;
            }
        }
    }
    Ok(())
}
