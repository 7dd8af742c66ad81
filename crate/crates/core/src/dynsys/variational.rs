use super::integrate::{dopri5, IntegratorOptions};
use super::trajectory::hermite;
use super::{FlowSystem, Trajectory};
use crate::error::{invalid, Result};
use crate::smallalg::Mat;

/// Fundamental matrix `Φ(t)` of `Φ' = A(t)Φ`, `Φ(t0) = I`, with
/// `A(t) = D_z h(γ(t), t)` along a reference trajectory `γ`.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    times: Vec<f64>,
    mats: Vec<Mat>,
    rates: Vec<Mat>,
}

impl FundamentalSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.mats
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// `Φ(t)`, interpolated with cubic Hermite between integrator nodes.
    pub fn at(&self, t: f64) -> Result<Mat> {
        let tol = 1e-12 * (1.0 + self.t_end().abs());
        if !(t >= self.t_start() - tol && t <= self.t_end() + tol) {
            return Err(invalid(format!(
                "time {t} outside variational span [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        let n = self.times.len();
        if n == 1 {
            return Ok(self.mats[0].clone());
        }
        let i = self.times.partition_point(|&x| x <= t).saturating_sub(1).min(n - 2);
        if t == self.times[i] {
            return Ok(self.mats[i].clone());
        }
        if t == self.times[i + 1] {
            return Ok(self.mats[i + 1].clone());
        }
        let d = self.mats[0].dim();
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (m0, m1, r0, r1) = (&self.mats[i], &self.mats[i + 1], &self.rates[i], &self.rates[i + 1]);
        Ok(Mat::from_fn(d, |r, c| {
            hermite(t0, m0[(r, c)], r0[(r, c)], t1, m1[(r, c)], r1[(r, c)], t)
        }))
    }
}

pub fn integrate_variational(
    flow: &FlowSystem,
    gamma: &Trajectory,
    t0: f64,
    t_end: f64,
    tol: f64,
) -> Result<FundamentalSolution> {
    integrate_variational_with(flow, gamma, t0, t_end, &IntegratorOptions::with_tol(tol))
}

pub fn integrate_variational_with(
    flow: &FlowSystem,
    gamma: &Trajectory,
    t0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<FundamentalSolution> {
    if !gamma.covers(t0) || !gamma.covers(t_end) {
        return Err(invalid(format!(
            "reference trajectory [{}, {}] does not cover [{t0}, {t_end}]",
            gamma.t_start(),
            gamma.t_end()
        )));
    }
    let d = flow.dim();
    if gamma.dim() != d {
        return Err(invalid("reference trajectory dimension differs from the flow"));
    }
    let lo = gamma.t_start();
    let hi = gamma.t_end();
    integrate_linear(
        |t| {
            let z = gamma.at(t.clamp(lo, hi))?;
            flow.jacobian(&z, t)
        },
        d,
        t0,
        t_end,
        opts,
    )
}

/// Fundamental matrix of `Φ' = A(t)Φ`, `Φ(t0) = I`, for an explicit family `A`.
pub fn integrate_linear<A>(a: A, d: usize, t0: f64, t_end: f64, opts: &IntegratorOptions) -> Result<FundamentalSolution>
where
    A: Fn(f64) -> Result<Mat>,
{
    let rhs = |t: f64, phi: &[f64]| -> Result<Vec<f64>> {
        let m = a(t)?;
        if m.dim() != d {
            return Err(invalid("linearization dimension changed during integration"));
        }
        let p = Mat::from_row_major(d, phi.to_vec())?;
        Ok(m.matmul(&p).as_slice().to_vec())
    };
    let run = dopri5(
        rhs,
        |_| true,
        t0,
        Mat::identity(d).as_slice().to_vec(),
        t_end,
        opts,
        |_, _| Ok(false),
    )?;
    let mut times = Vec::with_capacity(run.nodes.len());
    let mut mats = Vec::with_capacity(run.nodes.len());
    let mut rates = Vec::with_capacity(run.nodes.len());
    for nd in run.nodes {
        times.push(nd.t);
        mats.push(Mat::from_row_major(d, nd.y)?);
        rates.push(Mat::from_row_major(d, nd.f)?);
    }
    Ok(FundamentalSolution { times, mats, rates })
}
