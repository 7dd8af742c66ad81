use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::exit::{exit_point, find_exit, ExitOptions, ExitPrediction};
use super::series::{
    nile_point, series_fastslow, series_ftle, series_ftle_with, series_instant_eig, series_instant_eig_with,
    series_nile, AlongTrajectory,
};
use super::{BalanceKind, BalanceSeries, FtleMode};
use crate::dynsys::{integrate_with, IntegratorOptions, ManifoldSpec, Outcome, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::flows::{build, solid_body_fastslow, solid_body_rotational_linearization, FlowId, ModelFlow};
use crate::smallalg::{eigenvalues, Mat};

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const MIN_GRID_POINTS: usize = 101;
/// Time window scanned for the first sign change of the integrand when no
/// span is configured.
pub const PROBE_WINDOW: f64 = 20.0;
const PROBE_POINTS: usize = 401;
/// Multiple of the integrand's first sign-change time used as search span.
const SPAN_FACTOR: f64 = 8.0;

/// Matrix family fed to the eigenvalue and FTLE balances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearizationChoice {
    /// Jacobian of the field along the reference trajectory.
    #[default]
    Jacobian,
    /// Solid-body only: `[[0, −1], [1, α(β(t − t0) − b)]]`.
    Rotational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub flow: FlowId,
    pub params: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub method: BalanceKind,
    pub t0: f64,
    /// Entry point on the manifold; the flow's default entry when absent.
    pub z0: Option<Vec<f64>>,
    /// Search span after `t0`; chosen from the integrand when absent.
    pub span: Option<f64>,
    pub grid_points: usize,
    pub ode_tol: f64,
    pub zero_tol: Option<f64>,
    pub deriv_tol: f64,
    pub linearization: LinearizationChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flow: FlowId::SolidBody,
            params: BTreeMap::new(),
            method: BalanceKind::Nile,
            t0: 0.0,
            z0: None,
            span: None,
            grid_points: DEFAULT_GRID_POINTS,
            ode_tol: 1e-10,
            zero_tol: None,
            deriv_tol: 1e-6,
            linearization: LinearizationChoice::Jacobian,
        }
    }
}

impl PipelineConfig {
    pub fn new(flow: FlowId, method: BalanceKind) -> Self {
        PipelineConfig {
            flow,
            method,
            ..Default::default()
        }
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < MIN_GRID_POINTS {
            return Err(invalid(format!(
                "grid_points must be at least {MIN_GRID_POINTS}, got {}",
                self.grid_points
            )));
        }
        if !self.t0.is_finite() {
            return Err(invalid("t0 must be finite"));
        }
        if matches!(self.span, Some(s) if !(s > 0.0 && s.is_finite())) {
            return Err(invalid("span must be positive and finite"));
        }
        if !(self.ode_tol > 0.0) || !(self.deriv_tol > 0.0) || matches!(self.zero_tol, Some(z) if !(z > 0.0)) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }

    pub fn exit_options(&self) -> ExitOptions {
        ExitOptions {
            zero_tol: self.zero_tol,
            deriv_tol: self.deriv_tol,
        }
    }
}

/// Everything produced by one balance computation.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    /// The configuration with parameters, entry point and span resolved.
    pub config: PipelineConfig,
    pub flow: ModelFlow,
    pub reference: Trajectory,
    pub series: BalanceSeries,
    pub exit: Option<ExitPrediction>,
    pub warnings: Vec<String>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    v[n - 1] = b;
    v
}

fn reference(flow: &ModelFlow, z0: &[f64], grid: &[f64], tol: f64) -> Result<Trajectory> {
    let opts = IntegratorOptions::with_tol(tol).stops(grid.to_vec());
    let run = integrate_with(flow.reduced(), z0, grid[0], *grid.last().unwrap(), &opts)?;
    Ok(run.trajectory)
}

fn check_rotational(flow: &ModelFlow, cfg: &PipelineConfig) -> Result<()> {
    if flow.id != FlowId::SolidBody {
        return Err(Error::MethodUnavailable {
            method: format!("{} with rotational linearization", cfg.method.name()),
            flow: flow.id.to_string(),
        });
    }
    Ok(())
}

type BoxedLin<'a> = Box<dyn Fn(f64) -> Result<Mat> + 'a>;

fn linearization<'a>(
    flow: &'a ModelFlow,
    cfg: &PipelineConfig,
    z0: &[f64],
    gamma: &'a Trajectory,
) -> Result<BoxedLin<'a>> {
    match cfg.linearization {
        LinearizationChoice::Jacobian => {
            let lin = AlongTrajectory {
                flow: flow.system(),
                gamma,
            };
            Ok(Box::new(move |t| lin.flow.jacobian(&lin.gamma.at(t)?, t)))
        }
        LinearizationChoice::Rotational => {
            check_rotational(flow, cfg)?;
            let p = flow.solid_body_params().unwrap();
            Ok(Box::new(solid_body_rotational_linearization(p, -z0[0], cfg.t0)))
        }
    }
}

fn fastslow_unavailable(flow: &ModelFlow) -> Error {
    Error::MethodUnavailable {
        method: "fastslow".into(),
        flow: flow.id.to_string(),
    }
}

/// Rate whose first sign change sets the default span.
fn probe_rate(flow: &ModelFlow, cfg: &PipelineConfig, z0: &[f64], gamma: &Trajectory, t: f64) -> Result<f64> {
    let manifold = ManifoldSpec::Flat(flow.manifold().clone());
    match cfg.method {
        BalanceKind::InstantEig { index } => {
            let a = linearization(flow, cfg, z0, gamma)?(t)?;
            let spec = eigenvalues(&a)?;
            Ok(spec.values.get(index).map_or(0.0, |v| v.re))
        }
        BalanceKind::FastSlow { index } => {
            let p = flow.solid_body_params().ok_or_else(|| fastslow_unavailable(flow))?;
            let fs = solid_body_fastslow(p, 1.0)?;
            let z = gamma.at(t)?;
            let spec = eigenvalues(&fs.fast_jacobian(&[0.0, z[0]])?)?;
            Ok(spec.values.get(index).map_or(0.0, |v| v.re))
        }
        _ => nile_point(flow.system(), &manifold, &gamma.at(t)?, t),
    }
}

fn default_span(flow: &ModelFlow, cfg: &PipelineConfig, z0: &[f64], warnings: &mut Vec<String>) -> Result<f64> {
    let grid = linspace(cfg.t0, cfg.t0 + PROBE_WINDOW, PROBE_POINTS);
    let gamma = reference(flow, z0, &grid, cfg.ode_tol)?;
    let rates: Vec<(f64, f64)> = grid
        .iter()
        .take_while(|&&t| gamma.covers(t))
        .map(|&t| probe_rate(flow, cfg, z0, &gamma, t).map(|r| (t, r)))
        .collect::<Result<_>>()?;
    let scale = rates.iter().fold(0.0f64, |m, r| m.max(r.1.abs()));
    let tiny = 1e-12 * (1.0 + scale);
    let mut sign = 0.0;
    for w in rates.windows(2) {
        let (t1, r1) = w[1];
        if sign == 0.0 {
            if w[0].1.abs() > tiny {
                sign = w[0].1.signum();
            } else if r1.abs() > tiny {
                sign = r1.signum();
                continue;
            } else {
                continue;
            }
        }
        if r1.abs() > tiny && r1.signum() != sign {
            let (t0, r0) = w[0];
            let t_star = t0 + (t1 - t0) * r0 / (r0 - r1);
            let span = round_sig(SPAN_FACTOR * (t_star - cfg.t0));
            if span > 0.0 {
                return Ok(span);
            }
        }
    }
    warnings.push(format!(
        "integrand keeps its sign over the probe window; searching [t0, t0 + {PROBE_WINDOW}]"
    ));
    Ok(PROBE_WINDOW)
}

/// Rounds to 9 significant digits so that grids built from interpolated
/// sign changes land on short decimals.
fn round_sig(x: f64) -> f64 {
    format!("{x:.8e}").parse().unwrap_or(x)
}

struct Prepared {
    config: PipelineConfig,
    flow: ModelFlow,
    reference: Trajectory,
    series: BalanceSeries,
    warnings: Vec<String>,
}

fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let flow = build(cfg.flow, &cfg.params)?;
    let mut warnings = Vec::new();
    let z0 = cfg.z0.clone().unwrap_or_else(|| flow.entry.clone());
    if z0.len() != flow.system().dim() {
        return Err(invalid(format!("z0 must have {} components", flow.system().dim())));
    }
    let tol = 1e-10 * (1.0 + z0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if flow.manifold().distance(&z0) > tol {
        return Err(invalid(format!("entry point {z0:?} is not on the invariant manifold")));
    }
    match cfg.method {
        BalanceKind::MeasuredVelocity => {
            return Err(Error::MethodUnavailable {
                method: "velocity (requires sampled data; see ingest)".into(),
                flow: flow.id.to_string(),
            })
        }
        BalanceKind::FastSlow { .. } if flow.id != FlowId::SolidBody => return Err(fastslow_unavailable(&flow)),
        BalanceKind::Ftle { .. } | BalanceKind::InstantEig { .. }
            if cfg.linearization == LinearizationChoice::Rotational =>
        {
            check_rotational(&flow, cfg)?
        }
        _ => {}
    }
    if let BalanceKind::InstantEig { .. } = cfg.method {
        warnings.push(
            "instantaneous eigenvalues ignore the time dependence of the linearization; \
             their balance can be degenerate and mispredict the exit"
                .into(),
        );
    }
    let span = match cfg.span {
        Some(s) => s,
        None => default_span(&flow, cfg, &z0, &mut warnings)?,
    };
    let mut grid = linspace(cfg.t0, cfg.t0 + span, cfg.grid_points);
    let opts = IntegratorOptions::with_tol(cfg.ode_tol).stops(grid.clone());
    let run = integrate_with(flow.reduced(), &z0, cfg.t0, cfg.t0 + span, &opts)?;
    if let Outcome::DomainExit { t, .. } = run.outcome {
        grid.retain(|&s| s <= t);
        warnings.push(format!("reference trajectory leaves the flow domain at t = {t}"));
        if grid.len() < 3 {
            return Err(invalid("reference trajectory leaves the domain immediately"));
        }
    }
    let gamma = run.trajectory;
    let manifold = ManifoldSpec::Flat(flow.manifold().clone());
    let series = match cfg.method {
        BalanceKind::Nile => series_nile(flow.system(), &manifold, &gamma, &grid)?,
        BalanceKind::InstantEig { index } => match cfg.linearization {
            LinearizationChoice::Jacobian => series_instant_eig(flow.system(), &manifold, &gamma, index, &grid)?,
            LinearizationChoice::Rotational => {
                let lin = linearization(&flow, cfg, &z0, &gamma)?;
                series_instant_eig_with(&lin, index, &grid, z0.clone())?
            }
        },
        BalanceKind::FastSlow { index } => {
            let fs = solid_body_fastslow(flow.solid_body_params().unwrap(), 1.0)?;
            let slow_opts = IntegratorOptions::with_tol(cfg.ode_tol).stops(grid.clone());
            let slow = integrate_with(
                &fs.slow_flow(),
                &[0.0, z0[0]],
                cfg.t0,
                *grid.last().unwrap(),
                &slow_opts,
            )?;
            let mut s = series_fastslow(&fs, &slow.trajectory, index, &grid)?;
            s.z0 = z0.clone();
            s
        }
        BalanceKind::Ftle { index, mode } => match cfg.linearization {
            LinearizationChoice::Jacobian => series_ftle(flow.system(), &gamma, index, mode, &grid, cfg.ode_tol)?,
            LinearizationChoice::Rotational => {
                let lin = linearization(&flow, cfg, &z0, &gamma)?;
                series_ftle_with(&lin, 2, index, mode, &grid, cfg.ode_tol, z0.clone())?
            }
        },
        BalanceKind::MeasuredVelocity => unreachable!(),
    };
    if series.flags.ambiguous_crossings > 0 {
        warnings.push(format!(
            "eigenvalue branches were ambiguous at {} samples",
            series.flags.ambiguous_crossings
        ));
    }
    if series.flags.non_finite > 0 {
        warnings.push(format!(
            "{} samples are non-finite and were skipped",
            series.flags.non_finite
        ));
    }
    if matches!(
        cfg.method,
        BalanceKind::Ftle {
            mode: FtleMode::Commuting,
            ..
        }
    ) && cfg.linearization == LinearizationChoice::Jacobian
    {
        warnings.push("commuting-mode FTLE is exact only when the linearizations commute".into());
    }
    let config = PipelineConfig {
        params: flow.params.clone(),
        z0: Some(z0),
        span: Some(span),
        ..cfg.clone()
    };
    Ok(Prepared {
        config,
        flow,
        reference: gamma,
        series,
        warnings,
    })
}

/// Builds the configured balance series.
pub fn build_series(cfg: &PipelineConfig) -> Result<BalanceSeries> {
    Ok(prepare(cfg)?.series)
}

/// Builds the series, locates the first nontrivial zero and maps it to the
/// exit point on the manifold.
pub fn run_exit(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let p = prepare(cfg)?;
    let root = find_exit(&p.series, &cfg.exit_options())?;
    let exit = match root {
        Some(r) => {
            let z0 = p.config.z0.as_ref().unwrap();
            let state = exit_point(p.flow.reduced(), z0, cfg.t0, r.t, cfg.ode_tol)?;
            Some(r.with_state(state))
        }
        None => None,
    };
    let mut warnings = p.warnings;
    if exit.as_ref().is_some_and(|e| e.degenerate) {
        warnings.push("the exit root is degenerate (|dF/dt| below deriv_tol)".into());
    }
    Ok(PipelineRun {
        config: p.config,
        flow: p.flow,
        reference: p.reference,
        series: p.series,
        exit,
        warnings,
    })
}

/// Value of the configured balance function at time `t`, which must lie in
/// the (configured or default) span.
pub fn balance_value_at(cfg: &PipelineConfig, t: f64) -> Result<f64> {
    prepare(cfg)?.series.value_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(method: BalanceKind, b: f64) -> PipelineConfig {
        PipelineConfig::new(FlowId::SolidBody, method).param("b", b)
    }

    #[test]
    fn nile_solid_body_default() {
        let run = run_exit(&solid(BalanceKind::Nile, 1.0)).unwrap();
        let e = run.exit.unwrap();
        assert!((e.t - 2.0).abs() < 1e-9, "{}", e.t);
        assert!((e.exit_state[0] - 1.0).abs() < 1e-9);
        assert!((e.df_dt - 2.0).abs() < 1e-5);
        assert_eq!(run.config.span, Some(8.0));
    }

    #[test]
    fn fastslow_matches_nile() {
        let cfg = solid(BalanceKind::FastSlow { index: 0 }, 1.7)
            .param("beta", 0.8)
            .param("alpha", 1.3);
        let e = run_exit(&cfg).unwrap().exit.unwrap();
        assert!((e.t - 2.0 * 1.7 / 0.8).abs() < 1e-8);
    }

    #[test]
    fn commuting_ftle_rotational() {
        let mut cfg = solid(
            BalanceKind::Ftle {
                index: 0,
                mode: FtleMode::Commuting,
            },
            1.0,
        );
        cfg.linearization = LinearizationChoice::Rotational;
        let e = run_exit(&cfg).unwrap().exit.unwrap();
        assert!((e.t - 2.0).abs() < 1e-6, "{}", e.t);
    }

    #[test]
    fn eig_rotational_small_ab() {
        let mut cfg = solid(BalanceKind::InstantEig { index: 0 }, 0.5);
        cfg.linearization = LinearizationChoice::Rotational;
        let run = run_exit(&cfg).unwrap();
        assert!((run.exit.unwrap().t - 1.0).abs() < 1e-6);
        assert!(!run.warnings.is_empty());
    }

    #[test]
    fn unavailable_methods() {
        let km = PipelineConfig::new(FlowId::KuhlmannMuldoon, BalanceKind::FastSlow { index: 0 });
        assert!(matches!(run_exit(&km), Err(Error::MethodUnavailable { .. })));
        let v = solid(BalanceKind::MeasuredVelocity, 1.0);
        assert!(matches!(run_exit(&v), Err(Error::MethodUnavailable { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = solid(BalanceKind::Nile, 1.0);
        cfg.grid_points = 50;
        assert!(run_exit(&cfg).is_err());
        let mut cfg = solid(BalanceKind::Nile, 1.0);
        cfg.z0 = Some(vec![0.0, 0.3]);
        assert!(run_exit(&cfg).is_err());
    }

    #[test]
    fn km_default_has_exit() {
        let run = run_exit(&PipelineConfig::new(FlowId::KuhlmannMuldoon, BalanceKind::Nile)).unwrap();
        let e = run.exit.unwrap();
        assert!(e.t > 0.0 && e.t < 1.0);
        assert_eq!(e.exit_state[0], 1.5);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = solid(
            BalanceKind::Ftle {
                index: 1,
                mode: FtleMode::Exact,
            },
            2.0,
        );
        let j = serde_json::to_string(&cfg).unwrap();
        assert!(j.contains(r#""method":"ftle""#));
        assert_eq!(serde_json::from_str::<PipelineConfig>(&j).unwrap(), cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"flow":"km","method":"nile"}"#).unwrap();
        assert_eq!(partial.grid_points, DEFAULT_GRID_POINTS);
    }

    #[test]
    fn value_at_matches_closed_form() {
        let cfg = solid(BalanceKind::Nile, 1.0);
        let v = balance_value_at(&cfg, 1.3).unwrap();
        assert!((v - 2.0 * (1.3 * 1.3 / 2.0 - 1.3)).abs() < 1e-10);
    }
}
