//! Balance functions, exit-time root finding, sweeps and perturbation.
//!
//! A balance function accumulates a growth/decay rate along a reference
//! trajectory on the invariant manifold; its first nontrivial zero predicts
//! the exit time of nearby particles.

mod exit;
mod fit;
mod perturb;
mod pipeline;
mod series;
mod sweep;
mod tracking;

use serde::{Deserialize, Serialize};

use crate::dynsys::hermite;
use crate::error::{invalid, Result};

pub use exit::{evaluate_root, exit_point, find_exit, ExitOptions, ExitPrediction, ExitRoot};
pub use fit::{fit_line, LinearFit};
pub use perturb::{perturb_first_order, PerturbOptions, Perturbation};
pub use pipeline::{
    balance_value_at, build_series, run_exit, LinearizationChoice, PipelineConfig, PipelineRun, DEFAULT_GRID_POINTS,
    PROBE_WINDOW,
};
pub use series::{
    nile_point, series_fastslow, series_ftle, series_ftle_with, series_instant_eig, series_instant_eig_with,
    series_nile, series_velocity, AlongTrajectory, Linearization,
};
pub use sweep::{sweep, SweepResult, SweepRow, SweepSpec};
pub use tracking::track_branch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FtleMode {
    /// Fundamental matrix from the variational equation.
    Exact,
    /// `Φ = exp(∫A)`, exact only for commuting families.
    Commuting,
}

/// Which balance function to build. Branch indices are zero-based and refer
/// to the ordering by descending real part (singular values: descending).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum BalanceKind {
    #[serde(alias = "eig")]
    InstantEig {
        index: usize,
    },
    #[serde(alias = "fastslow")]
    FastSlow {
        index: usize,
    },
    Ftle {
        index: usize,
        mode: FtleMode,
    },
    Nile,
    MeasuredVelocity,
}

impl BalanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            BalanceKind::InstantEig { .. } => "eig",
            BalanceKind::FastSlow { .. } => "fastslow",
            BalanceKind::Ftle { .. } => "ftle",
            BalanceKind::Nile => "nile",
            BalanceKind::MeasuredVelocity => "velocity",
        }
    }

    /// Integral kinds vanish at the start time by construction.
    pub fn is_integral(&self) -> bool {
        !matches!(self, BalanceKind::Ftle { .. })
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            BalanceKind::InstantEig { index } | BalanceKind::FastSlow { index } | BalanceKind::Ftle { index, .. } => {
                Some(*index)
            }
            _ => None,
        }
    }
}

/// Sample-quality counters attached to a series.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesFlags {
    /// Samples where the eigenvalue iteration hit its cap.
    pub unconverged: usize,
    /// Steps where eigenvalue branches could not be matched unambiguously.
    pub ambiguous_crossings: usize,
    /// Sentinel (non-finite) values, excluded from root finding.
    pub non_finite: usize,
}

/// Balance-function values on a time grid, with optional exact time
/// derivatives (the integrand for integral kinds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSeries {
    pub kind: BalanceKind,
    pub t0: f64,
    pub z0: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub rates: Option<Vec<f64>>,
    pub flags: SeriesFlags,
}

impl BalanceSeries {
    pub fn new(
        kind: BalanceKind,
        t0: f64,
        z0: Vec<f64>,
        times: Vec<f64>,
        values: Vec<f64>,
        rates: Option<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != values.len() || rates.as_ref().is_some_and(|r| r.len() != times.len()) {
            return Err(invalid("series times, values and rates differ in length"));
        }
        if times.is_empty() {
            return Err(invalid("series is empty"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("series times must be strictly increasing"));
        }
        let non_finite = values.iter().filter(|v| !v.is_finite()).count();
        Ok(BalanceSeries {
            kind,
            t0,
            z0,
            times,
            values,
            rates,
            flags: SeriesFlags {
                non_finite,
                ..Default::default()
            },
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same series with values (and rates) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= c);
        if let Some(r) = s.rates.as_mut() {
            r.iter_mut().for_each(|v| *v *= c);
        }
        s
    }

    /// Node slopes: exact rates when stored, otherwise three-point
    /// finite differences on the (possibly nonuniform) grid.
    pub fn slopes(&self) -> Vec<f64> {
        if let Some(r) = &self.rates {
            return r.clone();
        }
        let (t, v) = (&self.times, &self.values);
        let n = t.len();
        if n < 2 {
            return vec![0.0; n];
        }
        let mut s = vec![0.0; n];
        s[0] = (v[1] - v[0]) / (t[1] - t[0]);
        s[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
        for i in 1..n - 1 {
            let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            let d0 = (v[i] - v[i - 1]) / h0;
            let d1 = (v[i + 1] - v[i]) / h1;
            s[i] = (h1 * d0 + h0 * d1) / (h0 + h1);
        }
        s
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        self.times
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(n.saturating_sub(2))
    }

    /// Cubic Hermite value at `t`, using the boundary cubics outside the
    /// grid. Exact at nodes.
    pub(crate) fn eval_with(&self, slopes: &[f64], t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 {
            return self.values[0];
        }
        let i = self.segment(t);
        if t == self.times[i] {
            return self.values[i];
        }
        if t == self.times[i + 1] {
            return self.values[i + 1];
        }
        hermite(
            self.times[i],
            self.values[i],
            slopes[i],
            self.times[i + 1],
            self.values[i + 1],
            slopes[i + 1],
            t,
        )
    }

    /// Interpolated value at `t` within the grid.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        if !(t >= a && t <= b) {
            return Err(invalid(format!("time {t} outside series span [{a}, {b}]")));
        }
        Ok(self.eval_with(&self.slopes(), t))
    }
}
