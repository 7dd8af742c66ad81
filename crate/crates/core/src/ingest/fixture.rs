use log::warn;
use serde::{Deserialize, Serialize};

use super::TrajectorySample;
use crate::balance::{run_exit, BalanceKind, PipelineConfig, PROBE_WINDOW};
use crate::dynsys::{integrate_with, IntegratorOptions, Outcome};
use crate::error::{invalid, Result};
use crate::flows::ModelFlow;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    /// Offset of the release point from the manifold entry point, along the
    /// inward direction.
    pub chi: f64,
    pub samples: usize,
    /// Sampled time span; 1.5 times the predicted exit time when absent.
    pub duration: Option<f64>,
    pub t0: f64,
    pub tol: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            chi: 1e-3,
            samples: 5000,
            duration: None,
            t0: 0.0,
            tol: 1e-11,
        }
    }
}

/// Synthetic particle data: integrates the full field from the flow's entry
/// point shifted by `chi` off the manifold and samples position, normal
/// velocity and `nᵀAn` at the particle on a uniform grid.
pub fn make_fixture(flow: &ModelFlow, opts: &FixtureOptions) -> Result<Vec<TrajectorySample>> {
    if !(opts.chi > 0.0 && opts.chi.is_finite()) {
        return Err(invalid(format!(
            "chi must be positive, got {}; a particle on the manifold never exits",
            opts.chi
        )));
    }
    if opts.samples < 3 {
        return Err(invalid("a fixture needs at least three samples"));
    }
    let duration = match opts.duration {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(invalid(format!("duration must be positive, got {d}"))),
        None => {
            let cfg = PipelineConfig {
                flow: flow.id,
                params: flow.params.clone(),
                t0: opts.t0,
                ..PipelineConfig::new(flow.id, BalanceKind::Nile)
            };
            match run_exit(&cfg)?.exit {
                Some(e) => 1.5 * (e.t - opts.t0),
                None => PROBE_WINDOW,
            }
        }
    };
    let z0: Vec<f64> = flow
        .entry
        .iter()
        .zip(&flow.inward)
        .map(|(e, n)| e + opts.chi * n)
        .collect();
    let n = opts.samples;
    let times: Vec<f64> = (0..n).map(|i| opts.t0 + duration * i as f64 / (n - 1) as f64).collect();
    let iopts = IntegratorOptions::with_tol(opts.tol).stops(times.clone());
    let run = integrate_with(flow.system(), &z0, opts.t0, *times.last().unwrap(), &iopts)?;
    if let Outcome::DomainExit { t, .. } = run.outcome {
        warn!("fixture particle left the flow domain at t = {t}; samples truncated");
    }
    let normal = flow.manifold().unit_normal().to_vec();
    let dot = |a: &[f64]| a.iter().zip(&normal).map(|(x, y)| x * y).sum::<f64>();
    let gamma = run.trajectory;
    let mut out = Vec::with_capacity(n);
    for &t in times.iter().take_while(|&&t| t <= gamma.t_end()) {
        let z = gamma.at(t)?;
        let v = flow.system().eval(&z, t)?;
        let a = flow.system().jacobian(&z, t)?;
        out.push(TrajectorySample {
            t,
            normal_velocity: dot(&v),
            normal_rate: Some(a.bilinear(&normal, &normal)),
            position: z,
        });
    }
    Ok(out)
}
