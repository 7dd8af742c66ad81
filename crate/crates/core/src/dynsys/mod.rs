//! Vector fields, invariant manifolds, trajectory and variational integration,
//! and cumulative quadrature.

mod integrate;
mod manifold;
mod quadrature;
mod trajectory;
mod variational;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::smallalg::Mat;

pub use integrate::{
    integrate, integrate_until, integrate_with, Crossing, Integration, IntegratorOptions, Outcome, H_MIN,
};
pub use manifold::{project_to_manifold, FlatManifold, GraphDerivFn, GraphFn, GraphManifold, ManifoldSpec};
pub use quadrature::{cumulative_quadrature, cumulative_trapezoid, is_uniform};
pub use trajectory::{hermite, hermite_derivative, Trajectory};
pub use variational::{integrate_linear, integrate_variational, integrate_variational_with, FundamentalSolution};

/// Right-hand side `(z, t) ↦ z'`.
pub type RhsFn = dyn Fn(&[f64], f64) -> Result<Vec<f64>> + Send + Sync;
/// Jacobian `(z, t) ↦ D_z h(z, t)`.
pub type JacFn = dyn Fn(&[f64], f64) -> Result<Mat> + Send + Sync;

/// Closed axis-aligned box. Open ends are expressed with infinities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(invalid("domain box bounds must be ordered and of equal length"));
        }
        Ok(DomainBox { lower, upper })
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// A parameterized vector field `z' = h(z, t)` on `R^d`.
#[derive(Clone)]
pub struct FlowSystem {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    rhs: Arc<RhsFn>,
    jac: Option<Arc<JacFn>>,
    domain: Option<DomainBox>,
}

impl FlowSystem {
    pub fn new<F>(name: impl Into<String>, dim: usize, rhs: F) -> Self
    where
        F: Fn(&[f64], f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        assert!(dim >= 2, "flow systems live in R^d with d >= 2");
        FlowSystem {
            name: name.into(),
            dim,
            params: BTreeMap::new(),
            rhs: Arc::new(rhs),
            jac: None,
            domain: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], f64) -> Result<Mat> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        assert_eq!(domain.lower.len(), self.dim, "domain dimension mismatch");
        self.domain = Some(domain);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn domain(&self) -> Option<&DomainBox> {
        self.domain.as_ref()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn in_domain(&self, z: &[f64]) -> bool {
        self.domain.as_ref().map_or(true, |d| d.contains(z))
    }

    pub(crate) fn domain_error(&self, z: &[f64], t: f64) -> Error {
        Error::Domain {
            flow: self.name.clone(),
            t,
            state: z.to_vec(),
        }
    }

    pub fn eval(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        if z.len() != self.dim {
            return Err(invalid(format!(
                "{}: state has length {}, expected {}",
                self.name,
                z.len(),
                self.dim
            )));
        }
        let v = (self.rhs)(z, t)?;
        debug_assert_eq!(v.len(), self.dim);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.domain_error(z, t));
        }
        Ok(v)
    }

    /// Analytic Jacobian when available, otherwise central differences.
    pub fn jacobian(&self, z: &[f64], t: f64) -> Result<Mat> {
        match &self.jac {
            Some(jac) => jac(z, t),
            None => self.fd_jacobian(z, t),
        }
    }

    /// Central-difference Jacobian with per-coordinate step `1e-6·(1 + |z_i|)`.
    pub fn fd_jacobian(&self, z: &[f64], t: f64) -> Result<Mat> {
        let n = self.dim;
        let mut m = Mat::zeros(n);
        let mut zp = z.to_vec();
        for j in 0..n {
            let h = 1e-6 * (1.0 + z[j].abs());
            zp[j] = z[j] + h;
            let fp = self.eval(&zp, t)?;
            zp[j] = z[j] - h;
            let fm = self.eval(&zp, t)?;
            zp[j] = z[j];
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }
}

impl fmt::Debug for FlowSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}
