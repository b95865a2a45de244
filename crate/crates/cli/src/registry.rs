//! Built-in coefficient fields and terminal functions, selected by name.

use std::collections::BTreeMap;

use fkcouple_core::{builtin, CoefficientField, Terminal};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub struct Entry {
    pub name: &'static str,
    pub description: &'static str,
    pub defaults: &'static [(&'static str, f64)],
}

pub const FIELDS: &[Entry] = &[
    Entry {
        name: "constant",
        description: "a = a0·I, b = b0, c = c0",
        defaults: &[("a0", 1.0), ("b0", 0.0), ("c0", 0.0)],
    },
    Entry {
        name: "sin_perturbed",
        description: "a = (1 + amp·sin x₁)^power · I",
        defaults: &[("amp", 0.5), ("power", 2.0), ("c0", 0.0)],
    },
    Entry {
        name: "power_modulus",
        description: "a = (1 + amp·sgn(x₁)·min{1, |x₁|}^alpha) · I",
        defaults: &[("amp", 0.25), ("alpha", 0.5), ("c0", 0.0)],
    },
    Entry {
        name: "log_modulus",
        description: "a = (1 + amp·sgn(x₁)·min{1, (-log|x₁|)^(-alpha)}) · I",
        defaults: &[("amp", 0.25), ("alpha", 2.0), ("c0", 0.0)],
    },
    Entry {
        name: "sgn_drift",
        description: "a = I, b = -theta·sgn(x₁)·e₁",
        defaults: &[("theta", 1.0), ("c0", 0.0)],
    },
];

pub const TERMINALS: &[Entry] = &[
    Entry {
        name: "one",
        description: "f = value",
        defaults: &[("value", 1.0)],
    },
    Entry {
        name: "gaussian",
        description: "f = amp·exp(-|y - center|²/(2 width²))",
        defaults: &[("amp", 1.0), ("center", 0.0), ("width", 1.0)],
    },
    Entry {
        name: "linear",
        description: "f = slope·y₁ (unbounded)",
        defaults: &[("slope", 1.0)],
    },
];

fn lookup<'a>(table: &'a [Entry], what: &'static str, name: &str) -> Result<&'a Entry> {
    table
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CliError::UnknownName {
            what,
            name: name.to_string(),
            known: table.iter().map(|e| e.name).collect::<Vec<_>>().join(", "),
        })
}

/// Merges user parameters over the defaults; unknown keys are errors.
pub fn resolve_params(
    table: &[Entry],
    what: &'static str,
    name: &str,
    given: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let entry = lookup(table, what, name)?;
    for (k, v) in given {
        if !entry.defaults.iter().any(|(d, _)| d == k) {
            return Err(CliError::Config(format!("{what} '{name}' has no parameter '{k}'")));
        }
        if !v.is_finite() {
            return Err(CliError::Config(format!("{what} parameter '{k}' must be finite")));
        }
    }
    Ok(entry
        .defaults
        .iter()
        .map(|&(k, d)| (k.to_string(), *given.get(k).unwrap_or(&d)))
        .collect())
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> f64 {
    params[key]
}

pub fn build_field(cfg: &ExperimentConfig) -> Result<CoefficientField<f64>> {
    let p = resolve_params(FIELDS, "field", &cfg.field.name, &cfg.field.params)?;
    let d = cfg.dim();
    let c0 = param(&p, "c0");
    let field = match cfg.field.name.as_str() {
        "constant" => builtin::constant(d, param(&p, "a0"), param(&p, "b0"), c0),
        "sin_perturbed" => builtin::sin_perturbed(d, param(&p, "amp"), param(&p, "power"), c0),
        "power_modulus" => builtin::holder(d, param(&p, "amp"), param(&p, "alpha"), c0),
        "log_modulus" => builtin::log_modulus(d, param(&p, "amp"), param(&p, "alpha"), c0),
        "sgn_drift" => builtin::sgn_drift(d, param(&p, "theta"), c0),
        _ => unreachable!("name checked by resolve_params"),
    };
    Ok(field?)
}

pub fn build_terminal(cfg: &ExperimentConfig) -> Result<Terminal<f64>> {
    let p = resolve_params(TERMINALS, "terminal", &cfg.terminal.name, &cfg.terminal.params)?;
    Ok(match cfg.terminal.name.as_str() {
        "one" => Terminal::constant(param(&p, "value")),
        "gaussian" => {
            let width = param(&p, "width");
            if !(width > 0.0) {
                return Err(CliError::Config(format!(
                    "terminal width must be positive, got {width}"
                )));
            }
            Terminal::gaussian(param(&p, "amp"), vec![param(&p, "center"); cfg.dim()], width)
        }
        "linear" => Terminal::linear(param(&p, "slope")),
        _ => unreachable!("name checked by resolve_params"),
    })
}
