use serde::{Deserialize, Serialize};

use super::BalanceSeries;
use crate::dynsys::{integrate, FlowSystem, Outcome};
use crate::error::{invalid, Result};
use crate::roots::brent;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitOptions {
    /// Absolute zero tolerance. `None` uses `1e-9·(1 + max|F|)`.
    pub zero_tol: Option<f64>,
    /// `|dF/dt|` below this marks the root degenerate.
    pub deriv_tol: f64,
}

impl Default for ExitOptions {
    fn default() -> Self {
        ExitOptions {
            zero_tol: None,
            deriv_tol: 1e-6,
        }
    }
}

impl ExitOptions {
    pub fn zero_tol_for(&self, series: &BalanceSeries) -> f64 {
        self.zero_tol.unwrap_or(1e-9 * (1.0 + series.max_abs()))
    }
}

/// A zero of a balance series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRoot {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "dF_dt")]
    pub df_dt: f64,
    pub degenerate: bool,
    pub bracket: (f64, f64),
}

impl ExitRoot {
    pub fn with_state(self, exit_state: Vec<f64>) -> ExitPrediction {
        ExitPrediction {
            t: self.t,
            exit_state,
            df_dt: self.df_dt,
            degenerate: self.degenerate,
            bracket: self.bracket,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPrediction {
    #[serde(rename = "T")]
    pub t: f64,
    pub exit_state: Vec<f64>,
    #[serde(rename = "dF_dt")]
    pub df_dt: f64,
    pub degenerate: bool,
    pub bracket: (f64, f64),
}

fn derivative(series: &BalanceSeries, slopes: &[f64], t: f64) -> f64 {
    let span = series.times.last().unwrap() - series.times[0];
    let h = 1e-7 * span.max(f64::MIN_POSITIVE);
    (series.eval_with(slopes, t + h) - series.eval_with(slopes, t - h)) / (2.0 * h)
}

/// Root data at a caller-chosen time `t`, e.g. to report the trivial root
/// at the start time.
pub fn evaluate_root(series: &BalanceSeries, t: f64, opts: &ExitOptions) -> Result<ExitRoot> {
    let slopes = series.slopes();
    let (a, b) = (series.times[0], *series.times.last().unwrap());
    if !(t >= a && t <= b) {
        return Err(invalid(format!("time {t} outside series span [{a}, {b}]")));
    }
    let df_dt = derivative(series, &slopes, t);
    Ok(ExitRoot {
        t,
        df_dt,
        degenerate: df_dt.abs() < opts.deriv_tol,
        bracket: (t, t),
    })
}

/// First nontrivial zero of `series`.
///
/// Leading samples with `|F| ≤ zero_tol` form the initial plateau and are
/// skipped. The first sign change (or near-zero sample) after the plateau is
/// refined with Brent's method on the cubic Hermite interpolant. Sentinel
/// values are skipped. Returns `Ok(None)` when there is no such zero.
pub fn find_exit(series: &BalanceSeries, opts: &ExitOptions) -> Result<Option<ExitRoot>> {
    let n = series.len();
    if n < 3 {
        return Err(invalid("root finding needs at least three samples"));
    }
    let zt = opts.zero_tol_for(series);
    let (t, f) = (&series.times, &series.values);
    let Some(p) = (0..n).find(|&i| f[i].is_finite() && f[i].abs() > zt) else {
        return Ok(None);
    };
    let s0 = f[p].signum();
    let slopes = series.slopes();
    let interp = |x: f64| series.eval_with(&slopes, x);
    let refine = |a: usize, b: usize| -> Result<f64> {
        let xtol = 4.0 * f64::EPSILON * (1.0 + t[b].abs());
        brent(interp, t[a], t[b], f[a], f[b], xtol, 0.0)
    };

    let mut prev = p;
    for i in p + 1..n {
        if !f[i].is_finite() {
            continue;
        }
        let root = if f[i].signum() != s0 && f[i].abs() > zt {
            Some((refine(prev, i)?, (t[prev], t[i])))
        } else if f[i].abs() <= zt {
            if i + 1 < n && f[i + 1].is_finite() && f[i + 1].signum() != s0 && f[i] != 0.0 {
                let r = refine(i, i + 1).unwrap_or(t[i]);
                Some((r, (t[i], t[i + 1])))
            } else {
                Some((t[i], (t[prev], t[i])))
            }
        } else {
            None
        };
        if let Some((root, bracket)) = root {
            let df_dt = derivative(series, &slopes, root);
            return Ok(Some(ExitRoot {
                t: root,
                df_dt,
                degenerate: df_dt.abs() < opts.deriv_tol,
                bracket,
            }));
        }
        prev = i;
    }
    Ok(None)
}

/// Integrates the on-manifold dynamics from `z0` at `t0` to `t_exit`.
pub fn exit_point(reduced: &FlowSystem, z0: &[f64], t0: f64, t_exit: f64, tol: f64) -> Result<Vec<f64>> {
    if t_exit < t0 {
        return Err(invalid(format!("exit time {t_exit} precedes start time {t0}")));
    }
    if t_exit == t0 {
        return Ok(z0.to_vec());
    }
    let run = integrate(reduced, z0, t0, t_exit, tol)?;
    match run.outcome {
        Outcome::Completed => Ok(run.trajectory.last_state().to_vec()),
        Outcome::DomainExit { t, state } => Err(crate::Error::Domain {
            flow: reduced.name().to_string(),
            t,
            state,
        }),
        Outcome::Event(_) => unreachable!("no event function installed"),
    }
}
