use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_line, LinearFit};
use super::pipeline::{run_exit, PipelineConfig};
use crate::error::{invalid, Error, Result};

/// `steps` evenly spaced values of `param` from `from` to `to` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(invalid("sweep needs at least one step"));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(invalid("sweep range must be finite"));
        }
        if self.steps == 1 {
            return Ok(vec![self.from]);
        }
        let n = self.steps - 1;
        Ok((0..=n)
            .map(|i| {
                if i == n {
                    self.to
                } else {
                    self.from + (self.to - self.from) * i as f64 / n as f64
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub exit_state: Option<Vec<f64>>,
    #[serde(rename = "dF_dt")]
    pub df_dt: Option<f64>,
    pub degenerate: Option<bool>,
    /// Why the row has no exit: an error message, or "not found".
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub config: PipelineConfig,
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of `T` against the parameter over rows with an exit.
    pub fit: Option<LinearFit>,
}

fn run_row(base: &PipelineConfig, name: &str, value: f64) -> SweepRow {
    let mut cfg = base.clone();
    cfg.params.insert(name.to_string(), value);
    let empty = SweepRow {
        param: value,
        t: None,
        exit_state: None,
        df_dt: None,
        degenerate: None,
        error: None,
    };
    match run_exit(&cfg) {
        Ok(run) => match run.exit {
            Some(e) => SweepRow {
                t: Some(e.t),
                exit_state: Some(e.exit_state),
                df_dt: Some(e.df_dt),
                degenerate: Some(e.degenerate),
                ..empty
            },
            None => SweepRow {
                error: Some("not found".into()),
                ..empty
            },
        },
        Err(e) => SweepRow {
            error: Some(e.to_string()),
            ..empty
        },
    }
}

/// Runs the pipeline for each parameter value. Rows run in parallel and are
/// returned in parameter order; row failures are recorded in the row.
pub fn sweep(base: &PipelineConfig, spec: &SweepSpec) -> Result<SweepResult> {
    let values = spec.values()?;
    if !base.flow.defaults().iter().any(|(k, _)| *k == spec.param) {
        return Err(Error::UnknownParam {
            flow: base.flow.to_string(),
            name: spec.param.clone(),
        });
    }
    base.validate()?;
    let rows: Vec<SweepRow> = values.par_iter().map(|&v| run_row(base, &spec.param, v)).collect();
    let (xs, ts): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.t.map(|t| (r.param, t))).unzip();
    let fit = if values.len() > 1 { fit_line(&xs, &ts) } else { None };
    Ok(SweepResult {
        spec: spec.clone(),
        config: base.clone(),
        rows,
        fit,
    })
}

impl SweepResult {
    /// State dimension, taken from the first row with an exit.
    pub fn dim(&self) -> usize {
        self.rows
            .iter()
            .find_map(|r| r.exit_state.as_ref().map(Vec::len))
            .unwrap_or(2)
    }

    /// Writes `param,T,exit_1..exit_d,dF_dt,degenerate`. Rows without an
    /// exit leave the result cells empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["param".to_string(), "T".to_string()];
        header.extend((1..=d).map(|k| format!("exit_{k}")));
        header.extend(["dF_dt".to_string(), "degenerate".to_string()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.param.to_string(), opt(r.t)];
            match &r.exit_state {
                Some(s) => rec.extend(s.iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat(String::new()).take(d)),
            }
            rec.push(opt(r.df_dt));
            rec.push(r.degenerate.map(|b| b.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sidecar with the fit, spec, configuration and per-row errors.
    pub fn sidecar(&self) -> serde_json::Value {
        let errors: Vec<_> = self
            .rows
            .iter()
            .filter_map(|r| {
                r.error
                    .as_ref()
                    .map(|e| serde_json::json!({ "param": r.param, "error": e }))
            })
            .collect();
        serde_json::json!({
            "fit": self.fit,
            "spec": self.spec,
            "config": self.config,
            "errors": errors,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
