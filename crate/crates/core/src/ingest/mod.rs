//! Balance functions from sampled particle trajectories.
//!
//! Samples carry the particle position, its velocity normal to the manifold
//! and optionally the locally measured normal stretching rate `nᵀAn`. Both
//! balance integrands only accumulate while the particle is inside the region
//! gate.

mod fixture;
mod predict;
mod report;
mod samples;

use serde::{Deserialize, Serialize};

use crate::balance::{find_exit, nile_point, series_velocity, BalanceKind, BalanceSeries, ExitOptions, ExitRoot};
use crate::dynsys::{cumulative_trapezoid, FlatManifold, FlowSystem, ManifoldSpec};
use crate::error::{invalid, Error, Result};
use crate::flows::{ModelFlow, NeighbourhoodSpec};

pub use fixture::{make_fixture, FixtureOptions};
pub use predict::predict_next_zero;
pub use report::{read_report, write_report, IngestSummary, ReportTable};
pub use samples::{load_samples, parse_samples, write_samples, LoadedSamples, TrajectorySample};

pub const DEFAULT_WINDOW: usize = 25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    None,
    Linear,
    #[default]
    Quadratic,
}

impl Extrapolation {
    pub fn degree(self) -> Option<usize> {
        match self {
            Extrapolation::None => None,
            Extrapolation::Linear => Some(1),
            Extrapolation::Quadratic => Some(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub manifold: FlatManifold,
    pub gate: NeighbourhoodSpec,
    /// Samples before `t0` are ignored.
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub extrapolation: Extrapolation,
    #[serde(default = "default_window")]
    pub extrapolation_window: usize,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl IngestConfig {
    pub fn new(manifold: FlatManifold, gate: NeighbourhoodSpec) -> Self {
        IngestConfig {
            manifold,
            gate,
            t0: 0.0,
            extrapolation: Extrapolation::Quadratic,
            extrapolation_window: DEFAULT_WINDOW,
        }
    }

    /// Manifold and default gate of a registry flow.
    pub fn for_flow(flow: &ModelFlow) -> Self {
        IngestConfig::new(flow.manifold().clone(), flow.gate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extrapolation_window < 3 {
            return Err(invalid("extrapolation window must be at least 3"));
        }
        if !self.t0.is_finite() {
            return Err(invalid("t0 must be finite"));
        }
        if self.gate.coordinate_index() >= self.manifold.dim() {
            return Err(invalid("gate coordinate index exceeds the state dimension"));
        }
        Ok(())
    }
}

/// Gated balance series computed from samples.
#[derive(Clone, Debug)]
pub struct IngestRun {
    pub sigma: BalanceSeries,
    pub velocity: BalanceSeries,
    pub in_gate: Vec<bool>,
    pub first_zero_sigma: Option<ExitRoot>,
    pub first_zero_v: Option<ExitRoot>,
    pub predicted_zero: Option<f64>,
    pub predicted_zero_v: Option<f64>,
}

/// `F_σ` and `F_v` on the sample grid.
///
/// Positions are projected onto the manifold. The normal rate is the sample's
/// measured value when present, otherwise `nile_point` of `flow` at the
/// projected point. Samples outside the closed gate contribute nothing.
pub fn ingest_balance(
    samples: &[TrajectorySample],
    cfg: &IngestConfig,
    flow: Option<&FlowSystem>,
) -> Result<(BalanceSeries, BalanceSeries, Vec<bool>)> {
    cfg.validate()?;
    let used: Vec<&TrajectorySample> = samples.iter().filter(|s| s.t >= cfg.t0).collect();
    let d = cfg.manifold.dim();
    if let Some(s) = used.iter().find(|s| s.position.len() != d) {
        return Err(invalid(format!(
            "sample at t = {} has {} coordinates, manifold has {d}",
            s.t,
            s.position.len()
        )));
    }
    let in_gate: Vec<bool> = used.iter().map(|s| cfg.gate.contains(&s.position)).collect();
    if in_gate.iter().filter(|&&g| g).count() < 3 {
        return Err(Error::NoSignal);
    }
    let spec = ManifoldSpec::Flat(cfg.manifold.clone());
    let mut rate = Vec::with_capacity(used.len());
    for (s, &g) in used.iter().zip(&in_gate) {
        let r = if !g {
            0.0
        } else if let Some(a) = s.normal_rate {
            a
        } else if let Some(f) = flow {
            nile_point(f, &spec, &cfg.manifold.project(&s.position), s.t)?
        } else {
            return Err(invalid(format!(
                "sample at t = {} has no normal rate and no flow was given to evaluate it",
                s.t
            )));
        };
        rate.push(r);
    }
    let times: Vec<f64> = used.iter().map(|s| s.t).collect();
    let z0 = cfg.manifold.project(&used[0].position);
    let values = cumulative_trapezoid(&times, &rate)?;
    let sigma = BalanceSeries::new(
        BalanceKind::Nile,
        times[0],
        z0.clone(),
        times.clone(),
        values,
        Some(rate),
    )?;
    let vn: Vec<f64> = used.iter().map(|s| s.normal_velocity).collect();
    let velocity = series_velocity(&times, &vn, &in_gate, z0)?;
    Ok((sigma, velocity, in_gate))
}

/// Full ingest pipeline: series, first zeros and extrapolated zeros.
pub fn run_ingest(samples: &[TrajectorySample], cfg: &IngestConfig, flow: Option<&FlowSystem>) -> Result<IngestRun> {
    let (sigma, velocity, in_gate) = ingest_balance(samples, cfg, flow)?;
    let opts = ExitOptions::default();
    let first_zero_sigma = find_exit(&sigma, &opts)?;
    let first_zero_v = find_exit(&velocity, &opts)?;
    let predicted_zero = predict_next_zero(&sigma, cfg.extrapolation, cfg.extrapolation_window);
    let predicted_zero_v = predict_next_zero(&velocity, cfg.extrapolation, cfg.extrapolation_window);
    Ok(IngestRun {
        sigma,
        velocity,
        in_gate,
        first_zero_sigma,
        first_zero_v,
        predicted_zero,
        predicted_zero_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{build, FlowId};
    use std::collections::BTreeMap;

    fn sample(t: f64, z2: f64, vn: f64, ann: Option<f64>) -> TrajectorySample {
        TrajectorySample {
            t,
            position: vec![t - 1.0, z2],
            normal_velocity: vn,
            normal_rate: ann,
        }
    }

    fn cfg() -> IngestConfig {
        IngestConfig::new(
            FlatManifold::coordinate(2, 1, 0.0).unwrap(),
            NeighbourhoodSpec::new(1, 0.0, 0.05).unwrap(),
        )
    }

    #[test]
    fn out_of_gate_is_no_signal() {
        let s: Vec<_> = (0..10).map(|i| sample(i as f64, 0.2, 1.0, Some(1.0))).collect();
        assert!(matches!(ingest_balance(&s, &cfg(), None), Err(Error::NoSignal)));
    }

    #[test]
    fn measured_rate_wins_over_model() {
        let flow = build(FlowId::SolidBody, &BTreeMap::new()).unwrap();
        let s: Vec<_> = (0..5).map(|i| sample(i as f64 * 0.1, 0.001, 0.0, Some(7.0))).collect();
        let (sig, _, _) = ingest_balance(&s, &cfg(), Some(flow.system())).unwrap();
        assert!((sig.values[4] - 7.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn model_rate_on_projection() {
        let flow = build(FlowId::SolidBody, &BTreeMap::new()).unwrap();
        let s: Vec<_> = (0..5).map(|i| sample(i as f64 * 0.5, 0.01, 0.0, None)).collect();
        let (sig, _, _) = ingest_balance(&s, &cfg(), Some(flow.system())).unwrap();
        // σ = α z1 at the projected point (z1, 0)
        let rates = sig.rates.unwrap();
        assert!((rates[1] - 2.0 * (0.5 - 1.0)).abs() < 1e-12);
        assert!(ingest_balance(&s, &cfg(), None).is_err());
    }

    #[test]
    fn samples_before_t0_ignored() {
        let s: Vec<_> = (0..6).map(|i| sample(i as f64, 0.0, 1.0, Some(1.0))).collect();
        let mut c = cfg();
        c.t0 = 2.0;
        let (sig, vel, _) = ingest_balance(&s, &c, None).unwrap();
        assert_eq!(sig.times[0], 2.0);
        assert_eq!(vel.values[3], 3.0);
    }

    #[test]
    fn config_json_defaults() {
        let j = r#"{"manifold":{"base_point":[0,0],"normals":[[0,1]]},
                    "gate":{"coordinate_index":1,"lower":0,"upper":0.05}}"#;
        let c: IngestConfig = serde_json::from_str(j).unwrap();
        assert_eq!(c.extrapolation, Extrapolation::Quadratic);
        assert_eq!(c.extrapolation_window, DEFAULT_WINDOW);
    }
}
