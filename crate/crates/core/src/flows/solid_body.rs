use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FlowModel;
use crate::dynsys::{DomainBox, FlatManifold, FlowSystem};
use crate::error::{invalid, Result};
use crate::smallalg::Mat;

/// Parameters of the regularized solid-body rotation
/// `z1' = −(z2 − β)`, `z2' = z1(1 − e^{−α z2})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidBodyParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SolidBodyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = SolidBodyParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(invalid(format!(
                "solid-body parameters must be positive and finite (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    fn map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("alpha".to_string(), self.alpha), ("beta".to_string(), self.beta)])
    }
}

/// Planar field, wall manifold `{z2 = 0}` and the wall dynamics `z1' = β`.
pub fn solid_body(p: SolidBodyParams) -> Result<FlowModel> {
    p.validate()?;
    let SolidBodyParams { alpha, beta } = p;
    let system = FlowSystem::new("solid-body", 2, move |z, _| {
        Ok(vec![-(z[1] - beta), z[0] * (-(-alpha * z[1]).exp_m1())])
    })
    .with_jacobian(move |z, _| {
        let e = (-alpha * z[1]).exp();
        Mat::from_rows(&[[0.0, -1.0], [-(-alpha * z[1]).exp_m1(), alpha * z[0] * e]])
    })
    .with_params(p.map())
    .with_domain(DomainBox::new(
        vec![f64::NEG_INFINITY, 0.0],
        vec![f64::INFINITY, f64::INFINITY],
    )?);

    let reduced = FlowSystem::new("solid-body/wall", 2, move |_, _| Ok(vec![beta, 0.0]))
        .with_jacobian(|_, _| Ok(Mat::zeros(2)))
        .with_params(p.map());

    Ok(FlowModel {
        system,
        manifold: FlatManifold::coordinate(2, 1, 0.0)?,
        reduced,
    })
}

/// The matrix family `[[0, −1], [1, α(β(t − t0) − b)]]` along the wall
/// trajectory entering at `(−b, 0)` at time `t0`.
///
/// Its lower-left entry is 1, whereas the Jacobian of the field on the wall has
/// 0 there (`1 − e^{−α·0}`). Both share the normal rate `α(β(t − t0) − b)`.
/// The instantaneous-eigenvalue dichotomy and the commuting-mode FTLE
/// identity are properties of this family, so it is exposed separately.
pub fn solid_body_rotational_linearization(
    p: SolidBodyParams,
    b: f64,
    t0: f64,
) -> impl Fn(f64) -> Result<Mat> + Send + Sync + Clone {
    move |t| Mat::from_rows(&[[0.0, -1.0], [1.0, p.alpha * (p.beta * (t - t0) - b)]])
}
