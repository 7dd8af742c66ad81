use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::SolidBodyParams;
use crate::dynsys::FlowSystem;
use crate::error::{invalid, Result};
use crate::smallalg::Mat;

type PartFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type PartJac = dyn Fn(&[f64], &[f64]) -> Mat + Send + Sync;

/// `ε x' = f(x, y)`, `y' = g(x, y)` with `x ∈ R^m`, `y ∈ R^n`, together with a
/// branch `x = x_c` of the critical manifold `{f = 0}` that slow trajectories
/// follow.
#[derive(Clone)]
pub struct FastSlowSystem {
    name: String,
    params: BTreeMap<String, f64>,
    eps: f64,
    m: usize,
    n: usize,
    fast: Arc<PartFn>,
    fast_dx: Arc<PartJac>,
    slow: Arc<PartFn>,
    critical_level: Vec<f64>,
}

impl FastSlowSystem {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn fast_dim(&self) -> usize {
        self.m
    }

    pub fn slow_dim(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn critical_level(&self) -> &[f64] {
        &self.critical_level
    }

    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.m)
    }

    pub fn fast(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.fast)(x, y)
    }

    /// `D_x f` at `(x, y)`, an `m × m` matrix.
    pub fn fast_jacobian(&self, z: &[f64]) -> Result<Mat> {
        if z.len() != self.m + self.n {
            return Err(invalid("fast-slow state has the wrong length"));
        }
        let (x, y) = self.split(z);
        Ok((self.fast_dx)(x, y))
    }

    /// The full system in the state `(x, y)` on the slow time scale.
    pub fn full_system(&self) -> FlowSystem {
        let this = self.clone();
        FlowSystem::new(format!("{}/eps", self.name), self.m + self.n, move |z, _| {
            let (x, y) = this.split(z);
            let mut v: Vec<f64> = (this.fast)(x, y).into_iter().map(|f| f / this.eps).collect();
            v.extend((this.slow)(x, y));
            Ok(v)
        })
        .with_params(self.params.clone())
    }

    /// Slow subsystem on the critical branch, `x = x_c`, `y' = g(x_c, y)`.
    pub fn slow_flow(&self) -> FlowSystem {
        let this = self.clone();
        FlowSystem::new(format!("{}/slow", self.name), self.m + self.n, move |z, _| {
            let (_, y) = this.split(z);
            let mut v = vec![0.0; this.m];
            v.extend((this.slow)(&this.critical_level, y));
            Ok(v)
        })
        .with_params(self.params.clone())
    }
}

impl fmt::Debug for FastSlowSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FastSlowSystem")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("critical_level", &self.critical_level)
            .finish_non_exhaustive()
    }
}

/// Solid-body rotation rescaled by `(z1, z2, t) = (y/√ε, x, s/√ε)`:
/// `ε ẋ = y(1 − e^{−αx})`, `ẏ = −(x − β)`, critical branch `x = 0`.
pub fn solid_body_fastslow(p: SolidBodyParams, eps: f64) -> Result<FastSlowSystem> {
    p.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let SolidBodyParams { alpha, beta } = p;
    let mut params = BTreeMap::from([("alpha".to_string(), alpha), ("beta".to_string(), beta)]);
    params.insert("eps".into(), eps);
    Ok(FastSlowSystem {
        name: "solid-body".into(),
        params,
        eps,
        m: 1,
        n: 1,
        fast: Arc::new(move |x, y| vec![y[0] * -(-alpha * x[0]).exp_m1()]),
        fast_dx: Arc::new(move |x, y| Mat::diag(&[y[0] * alpha * (-alpha * x[0]).exp()])),
        slow: Arc::new(move |x, _| vec![-(x[0] - beta)]),
        critical_level: vec![0.0],
    })
}
