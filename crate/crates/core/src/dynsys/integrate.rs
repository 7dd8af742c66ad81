//! Adaptive Dormand–Prince 5(4) with FSAL, exact stop times, domain-aware
//! step rejection and event location on the Hermite interpolant.

use super::trajectory::{hermite, Trajectory};
use super::FlowSystem;
use crate::error::{invalid, Error, Result};
use crate::roots::brent;

/// Smallest step the controller may propose before reporting stiffness.
pub const H_MIN: f64 = 1e-14;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Times the integrator must land on exactly.
    pub stops: Vec<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: None,
            h_max: None,
            max_steps: 1_000_000,
            stops: Vec::new(),
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }

    pub fn stops(mut self, stops: Vec<f64>) -> Self {
        self.stops = stops;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(invalid("integrator tolerances must be positive"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be positive"));
        }
        if matches!(self.h_max, Some(h) if !(h > 0.0)) {
            return Err(invalid("h_max must be positive"));
        }
        Ok(())
    }
}

/// How an integration ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    /// The flow left its domain. `state` is the last valid state at time `t`.
    DomainExit {
        t: f64,
        state: Vec<f64>,
    },
    /// The event function changed sign.
    Event(Crossing),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    pub steps: usize,
    pub rejected: usize,
}

pub(crate) struct Node {
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

pub(crate) enum Stop {
    Completed,
    DomainExit,
    Halted,
}

pub(crate) struct Run {
    pub nodes: Vec<Node>,
    pub stop: Stop,
    pub steps: usize,
    pub rejected: usize,
}

fn is_domain(e: &Error) -> bool {
    matches!(e, Error::Domain { .. })
}

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &IntegratorOptions) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (s / n).sqrt()
}

/// Core stepping loop. `rhs` errors of kind [`Error::Domain`] and states
/// rejected by `valid` shrink the step; once the step underflows the run ends
/// with [`Stop::DomainExit`]. `on_step` sees every accepted step and may halt.
pub(crate) fn dopri5<F, V, S>(
    mut rhs: F,
    mut valid: V,
    t0: f64,
    y0: Vec<f64>,
    t_end: f64,
    opts: &IntegratorOptions,
    mut on_step: S,
) -> Result<Run>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    V: FnMut(&[f64]) -> bool,
    S: FnMut(&Node, &Node) -> Result<bool>,
{
    opts.validate()?;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(invalid(format!(
            "integration span [{t0}, {t_end}] is empty or not finite"
        )));
    }
    let n = y0.len();
    let f0 = rhs(t0, &y0)?;
    let mut stops: Vec<f64> = opts.stops.iter().copied().filter(|s| *s > t0 && *s < t_end).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_end);
    let mut next_stop = 0;

    let span = t_end - t0;
    let mut h = match opts.h_init {
        Some(h) if h > 0.0 => h,
        _ => {
            let sc = |v: &[f64]| {
                (v.iter()
                    .zip(&y0)
                    .map(|(a, y)| (a / (opts.atol + opts.rtol * y.abs())).powi(2))
                    .sum::<f64>()
                    / n as f64)
                    .sqrt()
            };
            let d0 = sc(&y0);
            let d1 = sc(&f0);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        }
    };
    h = h.min(span);
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }

    let mut nodes = vec![Node { t: t0, y: y0, f: f0 }];
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];

    loop {
        let cur = nodes.last().unwrap();
        let t = cur.t;
        if t >= t_end {
            return Ok(Run {
                nodes,
                stop: Stop::Completed,
                steps,
                rejected,
            });
        }
        let target = stops[next_stop];
        let remaining = target - t;
        let hit = h >= remaining;
        let h_try = if hit { remaining } else { h };

        k[0].copy_from_slice(&cur.f);
        let mut stage_err = None;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = cur.y[i] + h_try * acc;
            }
            if !ytmp.iter().all(|v| v.is_finite()) || (s == 6 && !valid(&ytmp)) {
                stage_err = Some(Error::Domain {
                    flow: String::new(),
                    t,
                    state: ytmp.clone(),
                });
                break;
            }
            let ts = if s == 6 && hit { target } else { t + C[s] * h_try };
            match rhs(ts, &ytmp) {
                Ok(v) => k[s] = v,
                Err(e) if is_domain(&e) => {
                    stage_err = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if stage_err.is_some() {
            rejected += 1;
            h = h_try * 0.25;
            if h < H_MIN {
                return Ok(Run {
                    nodes,
                    stop: Stop::DomainExit,
                    steps,
                    rejected,
                });
            }
            continue;
        }
        // ytmp now holds the fifth-order solution (row 6 of A is the b vector)
        let err: Vec<f64> = (0..n)
            .map(|i| h_try * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>())
            .collect();
        let en = err_norm(&err, &cur.y, &ytmp, opts);
        if en <= 1.0 {
            let t_new = if hit { target } else { t + h_try };
            let node = Node {
                t: t_new,
                y: ytmp.clone(),
                f: k[6].clone(),
            };
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::MaxSteps(opts.max_steps));
            }
            let halt = on_step(nodes.last().unwrap(), &node)?;
            nodes.push(node);
            if hit {
                next_stop += 1;
            }
            if halt {
                return Ok(Run {
                    nodes,
                    stop: Stop::Halted,
                    steps,
                    rejected,
                });
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = if hit { h.max(h_try * factor) } else { h_try * factor };
        } else {
            rejected += 1;
            h = h_try * (0.9 * en.powf(-0.2)).max(0.2);
            if h < H_MIN {
                return Err(Error::Stiff { t, h });
            }
        }
        if let Some(hm) = opts.h_max {
            h = h.min(hm);
        }
    }
}

fn to_trajectory(nodes: Vec<Node>) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(nodes.len());
    let mut states = Vec::with_capacity(nodes.len());
    let mut vel = Vec::with_capacity(nodes.len());
    for nd in nodes {
        times.push(nd.t);
        states.push(nd.y);
        vel.push(nd.f);
    }
    Trajectory::new(times, states, vel)
}

fn check_start(flow: &FlowSystem, z0: &[f64], t0: f64) -> Result<()> {
    if z0.len() != flow.dim() {
        return Err(invalid(format!(
            "initial state has length {}, flow {} has dimension {}",
            z0.len(),
            flow.name(),
            flow.dim()
        )));
    }
    if z0.iter().any(|v| !v.is_finite()) || !flow.in_domain(z0) {
        return Err(flow.domain_error(z0, t0));
    }
    Ok(())
}

/// Integrates `flow` from `(t0, z0)` to `t_end` with `rtol = atol = tol`.
pub fn integrate(flow: &FlowSystem, z0: &[f64], t0: f64, t_end: f64, tol: f64) -> Result<Integration> {
    integrate_with(flow, z0, t0, t_end, &IntegratorOptions::with_tol(tol))
}

pub fn integrate_with(
    flow: &FlowSystem,
    z0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Integration> {
    check_start(flow, z0, t0)?;
    let run = dopri5(
        |t, y| flow.eval(y, t),
        |y| flow.in_domain(y),
        t0,
        z0.to_vec(),
        t_end,
        opts,
        |_, _| Ok(false),
    )?;
    finish(run)
}

fn finish(run: Run) -> Result<Integration> {
    let (steps, rejected) = (run.steps, run.rejected);
    let stop = run.stop;
    let trajectory = to_trajectory(run.nodes)?;
    let outcome = match stop {
        Stop::Completed | Stop::Halted => Outcome::Completed,
        Stop::DomainExit => Outcome::DomainExit {
            t: trajectory.t_end(),
            state: trajectory.last_state().to_vec(),
        },
    };
    Ok(Integration {
        trajectory,
        outcome,
        steps,
        rejected,
    })
}

/// Integrates until `event(z, t)` changes sign, locating the crossing to
/// near machine precision on the step's Hermite interpolant. A start exactly
/// on the event surface is not itself a crossing.
pub fn integrate_until<G>(
    flow: &FlowSystem,
    z0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
    event: G,
) -> Result<Integration>
where
    G: Fn(&[f64], f64) -> f64,
{
    check_start(flow, z0, t0)?;
    let mut last_sign = event(z0, t0).signum();
    if event(z0, t0) == 0.0 {
        last_sign = 0.0;
    }
    let mut crossing: Option<Crossing> = None;
    let run = dopri5(
        |t, y| flow.eval(y, t),
        |y| flow.in_domain(y),
        t0,
        z0.to_vec(),
        t_end,
        opts,
        |a, b| {
            let g1 = event(&b.y, b.t);
            if g1 == 0.0 {
                if last_sign != 0.0 {
                    crossing = Some(Crossing {
                        t: b.t,
                        state: b.y.clone(),
                    });
                    return Ok(true);
                }
                return Ok(false);
            }
            if last_sign == 0.0 {
                last_sign = g1.signum();
                return Ok(false);
            }
            if g1.signum() == last_sign {
                return Ok(false);
            }
            let interp = |t: f64| -> Vec<f64> {
                (0..a.y.len())
                    .map(|i| hermite(a.t, a.y[i], a.f[i], b.t, b.y[i], b.f[i], t))
                    .collect()
            };
            let g0 = event(&a.y, a.t);
            let tc = brent(
                |t| event(&interp(t), t),
                a.t,
                b.t,
                g0,
                g1,
                4.0 * f64::EPSILON * (1.0 + b.t.abs()),
                0.0,
            )?;
            crossing = Some(Crossing {
                t: tc,
                state: interp(tc),
            });
            Ok(true)
        },
    )?;
    let mut out = finish(run)?;
    if let Some(c) = crossing {
        out.trajectory.truncate_at(c.t)?;
        out.outcome = Outcome::Event(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::DomainBox;

    fn oscillator() -> FlowSystem {
        FlowSystem::new("osc", 2, |z, _| Ok(vec![z[1], -z[0]]))
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let r = integrate(&oscillator(), &[1.0, 0.0], 0.0, 10.0, 1e-12).unwrap();
        let end = r.trajectory.last_state();
        assert!((end[0] - 10f64.cos()).abs() < 1e-9);
        assert!((end[1] + 10f64.sin()).abs() < 1e-9);
        assert_eq!(r.trajectory.t_end(), 10.0);
        assert_eq!(r.outcome, Outcome::Completed);
    }

    #[test]
    fn interpolant_accuracy() {
        let r = integrate(&oscillator(), &[1.0, 0.0], 0.0, 6.0, 1e-12).unwrap();
        for i in 0..60 {
            let t = 0.1 * i as f64 + 0.037;
            let z = r.trajectory.at(t).unwrap();
            assert!((z[0] - t.cos()).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn lands_on_stops() {
        let opts = IntegratorOptions::with_tol(1e-8).stops(vec![0.3, 1.7, 2.5]);
        let r = integrate_with(&oscillator(), &[1.0, 0.0], 0.0, 2.0, &opts).unwrap();
        assert!(r.trajectory.times().contains(&0.3));
        assert!(r.trajectory.times().contains(&1.7));
        assert!(!r.trajectory.times().contains(&2.5));
    }

    #[test]
    fn exponential_growth_convergence() {
        let f = FlowSystem::new("exp", 2, |z, _| Ok(vec![z[0], -2.0 * z[1]]));
        let mut prev = f64::INFINITY;
        for tol in [1e-4, 1e-7, 1e-10] {
            let r = integrate(&f, &[1.0, 1.0], 0.0, 2.0, tol).unwrap();
            let e = (r.trajectory.last_state()[0] - 2f64.exp()).abs();
            assert!(e < prev);
            prev = e;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn domain_exit_reports_last_valid_state() {
        let f = FlowSystem::new("drift", 2, |_, _| Ok(vec![1.0, 0.0]))
            .with_domain(DomainBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap());
        let r = integrate(&f, &[0.0, 0.0], 0.0, 3.0, 1e-10).unwrap();
        match r.outcome {
            Outcome::DomainExit { t, state } => {
                assert!(t <= 1.0 && t > 1.0 - 1e-9, "t={t}");
                assert!(state[0] <= 1.0);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn rhs_domain_error_becomes_exit() {
        let f = FlowSystem::new("log", 2, |z, _| {
            if z[0] <= 0.0 {
                return Err(Error::Domain {
                    flow: "log".into(),
                    t: 0.0,
                    state: z.to_vec(),
                });
            }
            Ok(vec![-1.0, z[0].ln()])
        });
        let r = integrate(&f, &[0.5, 0.0], 0.0, 2.0, 1e-9).unwrap();
        assert!(matches!(r.outcome, Outcome::DomainExit { .. }));
        assert!(r.trajectory.t_end() < 0.5 + 1e-9);
    }

    #[test]
    fn start_outside_domain_is_error() {
        let f = oscillator().with_domain(DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        assert!(matches!(
            integrate(&f, &[2.0, 0.0], 0.0, 1.0, 1e-8),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn max_steps_enforced() {
        let opts = IntegratorOptions {
            max_steps: 3,
            ..IntegratorOptions::with_tol(1e-12)
        };
        assert!(matches!(
            integrate_with(&oscillator(), &[1.0, 0.0], 0.0, 100.0, &opts),
            Err(Error::MaxSteps(3))
        ));
    }

    #[test]
    fn event_located() {
        let opts = IntegratorOptions::with_tol(1e-12);
        let r = integrate_until(&oscillator(), &[1.0, 0.0], 0.0, 10.0, &opts, |z, _| z[0]).unwrap();
        match r.outcome {
            Outcome::Event(c) => {
                assert!((c.t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
                assert_eq!(r.trajectory.t_end(), c.t);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn bad_span_rejected() {
        assert!(integrate(&oscillator(), &[1.0, 0.0], 1.0, 1.0, 1e-8).is_err());
    }
}
