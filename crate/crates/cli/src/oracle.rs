//! Closed-form oracle tables for plotting.

use std::fmt::Write as _;

use fkcouple_core::{
    bm_coupling_expectation, heat_kernel, running_max_bounds, sgn_drift_density, Matrix, RunningMaxQuery, SgnDriftQuery,
};
use serde_json::Value;

use crate::config::{Axis, OracleFamily, OracleSection};
use crate::error::{CliError, Result};
use crate::run::Artifacts;

fn axis(a: &Option<Axis>, name: &str) -> Result<Vec<f64>> {
    a.as_ref()
        .ok_or_else(|| CliError::Config(format!("oracle.{name} is required")))?
        .values()
}

pub fn table(o: &OracleSection) -> Result<Artifacts> {
    let mut csv = String::new();
    match o.family {
        OracleFamily::SgnDrift | OracleFamily::Heat => {
            let (ts, xs, ys) = (axis(&o.t, "t")?, axis(&o.x, "x")?, axis(&o.y, "y")?);
            csv.push_str("t,x,y,density\n");
            let a0 = Matrix::from_diag(&[o.a0.unwrap_or(1.0)]);
            let b0 = [o.b0.unwrap_or(0.0)];
            for &t in &ts {
                for &x in &xs {
                    for &y in &ys {
                        let v = match o.family {
                            OracleFamily::SgnDrift => sgn_drift_density(SgnDriftQuery {
                                theta: o.theta.unwrap_or(1.0),
                                t,
                                x,
                                y,
                            })?,
                            _ => heat_kernel(&a0, &b0, t, &[x], &[y])?,
                        };
                        writeln!(csv, "{t},{x},{y},{v}").unwrap();
                    }
                }
            }
        }
        OracleFamily::RunningMax => {
            let (ts, xs) = (axis(&o.t, "t")?, axis(&o.x, "x")?);
            let (c1, c2) = (o.c1.unwrap_or(1.0), o.c2.unwrap_or(1.0));
            csv.push_str("t,x,c1,c2,upper_bound,lower_level_bound,exact\n");
            for &t in &ts {
                for &x in &xs {
                    let b = running_max_bounds(RunningMaxQuery { t, x, c1, c2 })?;
                    writeln!(csv, "{t},{x},{c1},{c2},{},{},{}", b.upper, b.lower_level, b.exact).unwrap();
                }
            }
        }
        OracleFamily::BmCoupling => {
            let (ds, ts) = (axis(&o.d0, "d0")?, axis(&o.t, "t")?);
            csv.push_str("d0,t,value\n");
            for &d0 in &ds {
                for &t in &ts {
                    let v = bm_coupling_expectation(d0, t)?;
                    writeln!(csv, "{d0},{t},{v}").unwrap();
                }
            }
        }
    }
    Ok(Artifacts {
        csv,
        fits: Value::Null,
        paths_csv: None,
    })
}
