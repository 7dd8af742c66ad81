use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Cubic Hermite value on `[t0, t1]` from endpoint values and slopes.
pub fn hermite(t0: f64, y0: f64, f0: f64, t1: f64, y1: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}

/// Time derivative of [`hermite`].
pub fn hermite_derivative(t0: f64, y0: f64, f0: f64, t1: f64, y1: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return f0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1
}

/// Time-ordered states with velocities and cubic Hermite interpolation between
/// nodes. Evaluation at a node returns the stored state exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || times.len() != velocities.len() {
            return Err(invalid(
                "trajectory needs matching non-empty times, states and velocities",
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("trajectory times must be strictly increasing"));
        }
        let d = states[0].len();
        if states.iter().chain(&velocities).any(|v| v.len() != d) {
            return Err(invalid("trajectory states have inconsistent dimension"));
        }
        Ok(Trajectory {
            times,
            states,
            velocities,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn span_tol(&self) -> f64 {
        1e-12 * (1.0 + self.t_start().abs().max(self.t_end().abs()))
    }

    pub fn covers(&self, t: f64) -> bool {
        let tol = self.span_tol();
        t >= self.t_start() - tol && t <= self.t_end() + tol
    }

    /// Index `i` with `times[i] ≤ t ≤ times[i+1]`, clamped to the valid range.
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        let i = self.times.partition_point(|&x| x <= t);
        i.saturating_sub(1).min(n - 2)
    }

    fn check(&self, t: f64) -> Result<()> {
        if !t.is_finite() || !self.covers(t) {
            return Err(invalid(format!(
                "time {t} outside trajectory span [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok(())
    }

    /// State at time `t`.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        if self.times.len() == 1 {
            return Ok(self.states[0].clone());
        }
        let i = self.segment(t);
        if t == self.times[i] {
            return Ok(self.states[i].clone());
        }
        if t == self.times[i + 1] {
            return Ok(self.states[i + 1].clone());
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        Ok((0..self.dim())
            .map(|k| {
                hermite(
                    t0,
                    self.states[i][k],
                    self.velocities[i][k],
                    t1,
                    self.states[i + 1][k],
                    self.velocities[i + 1][k],
                    t,
                )
            })
            .collect())
    }

    /// Interpolated velocity at time `t`.
    pub fn velocity_at(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        if self.times.len() == 1 {
            return Ok(self.velocities[0].clone());
        }
        let i = self.segment(t);
        if t == self.times[i] {
            return Ok(self.velocities[i].clone());
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        Ok((0..self.dim())
            .map(|k| {
                hermite_derivative(
                    t0,
                    self.states[i][k],
                    self.velocities[i][k],
                    t1,
                    self.states[i + 1][k],
                    self.velocities[i + 1][k],
                    t,
                )
            })
            .collect())
    }

    /// Drops all nodes after `t`, appending an interpolated node at `t` when
    /// it falls strictly inside a segment.
    pub fn truncate_at(&mut self, t: f64) -> Result<()> {
        self.check(t)?;
        let state = self.at(t)?;
        let vel = self.velocity_at(t)?;
        let keep = self.times.partition_point(|&x| x < t);
        self.times.truncate(keep);
        self.states.truncate(keep);
        self.velocities.truncate(keep);
        self.times.push(t);
        self.states.push(state);
        self.velocities.push(vel);
        Ok(())
    }
}
