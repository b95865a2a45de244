//! Re-derives fits from a persisted results.csv.

use std::fs;
use std::path::Path;

use fkcouple_core::{fit_log_corrected, fit_power_law, COUPLING_CSV_HEADER, MODULUS_CSV_HEADER};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::run::fit_json;

fn column(header: &[&str], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| CliError::Config(format!("results.csv has no column '{name}'")))
}

fn parse_rows(text: &str) -> Result<(Vec<&str>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad value '{v}' in results.csv: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Fits for a run directory, in the same shape as summary.json's `fits`.
pub fn report(run_dir: &Path) -> Result<Value> {
    let path = run_dir.join("results.csv");
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let first = text.lines().next().unwrap_or_default();
    let (header, rows) = parse_rows(&text)?;
    let pairs = |x: usize, y: usize, abs: bool| -> Vec<(f64, f64)> {
        rows.iter()
            .map(|r| (r[x], if abs { r[y].abs() } else { r[y] }))
            .collect()
    };
    if first == COUPLING_CSV_HEADER {
        let (d, t) = (column(&header, "distance")?, column(&header, "mean_tau_capped")?);
        Ok(json!({ "tau_fit": fit_json(&fit_power_law(&pairs(d, t, false)).ok()) }))
    } else if first == MODULUS_CSV_HEADER {
        let d = column(&header, "distance")?;
        let delta = pairs(d, column(&header, "delta_u")?, true);
        let tau = pairs(d, column(&header, "tau_mean")?, false);
        let fit = fit_power_law(&delta).ok();
        Ok(json!({
            "delta_fit": fit_json(&fit),
            "delta_fit_log_corrected": fit_json(&fit_log_corrected(&delta).ok()),
            "tau_fit": fit_json(&fit_power_law(&tau).ok()),
            "lipschitz_consistent": fit.map(|f| f.consistent_with_lipschitz()),
        }))
    } else {
        Err(CliError::Config(format!(
            "{} holds no distance ladder to fit",
            path.display()
        )))
    }
}
