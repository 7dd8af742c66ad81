//! Built-in model flows and their registry.

mod fastslow;
mod km;
mod solid_body;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynsys::{FlatManifold, FlowSystem};
use crate::error::{invalid, Error, Result};

pub use fastslow::{solid_body_fastslow, FastSlowSystem};
pub use km::{km_surface_speed, kuhlmann_muldoon, nile_integrand_km, KuhlmannMuldoonParams, KM_SURFACE};
pub use solid_body::{solid_body, solid_body_rotational_linearization, SolidBodyParams};

/// A field together with the invariant manifold it preserves and the
/// dynamics on that manifold, written in ambient coordinates.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub system: FlowSystem,
    pub manifold: FlatManifold,
    pub reduced: FlowSystem,
}

/// Slab `{lower ≤ z_k ≤ upper}` around a manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGate")]
pub struct NeighbourhoodSpec {
    coordinate_index: usize,
    lower: f64,
    upper: f64,
}

#[derive(Deserialize)]
struct RawGate {
    coordinate_index: usize,
    lower: f64,
    upper: f64,
}

impl TryFrom<RawGate> for NeighbourhoodSpec {
    type Error = Error;

    fn try_from(r: RawGate) -> Result<Self> {
        NeighbourhoodSpec::new(r.coordinate_index, r.lower, r.upper)
    }
}

impl NeighbourhoodSpec {
    pub fn new(coordinate_index: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(invalid(format!(
                "gate bounds must satisfy lower < upper ({lower}, {upper})"
            )));
        }
        Ok(NeighbourhoodSpec {
            coordinate_index,
            lower,
            upper,
        })
    }

    pub fn coordinate_index(&self) -> usize {
        self.coordinate_index
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Closed-interval membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.get(self.coordinate_index)
            .is_some_and(|&v| self.lower <= v && v <= self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowId {
    #[serde(rename = "solid-body")]
    SolidBody,
    #[serde(rename = "km")]
    KuhlmannMuldoon,
}

impl FlowId {
    pub const ALL: [FlowId; 2] = [FlowId::SolidBody, FlowId::KuhlmannMuldoon];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowId::SolidBody => "solid-body",
            FlowId::KuhlmannMuldoon => "km",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FlowId::SolidBody => "regularized solid-body rotation over the wall z2 = 0",
            FlowId::KuhlmannMuldoon => "Kuhlmann-Muldoon planar model, free surface z1 = 3/2",
        }
    }

    /// Parameter names with defaults. The last entry sets the on-manifold
    /// entry point.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            FlowId::SolidBody => &[("alpha", 2.0), ("beta", 1.0), ("b", 1.0)],
            FlowId::KuhlmannMuldoon => &[("alpha_s", 0.1), ("eta", 4.74), ("z2_0", 0.4)],
        }
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solid-body" => Ok(FlowId::SolidBody),
            "km" => Ok(FlowId::KuhlmannMuldoon),
            other => Err(Error::UnknownFlow(other.to_string())),
        }
    }
}

/// A registry flow with resolved parameters, entry point and default gate.
#[derive(Clone, Debug)]
pub struct ModelFlow {
    pub id: FlowId,
    pub params: BTreeMap<String, f64>,
    pub model: FlowModel,
    /// Default entry point on the manifold.
    pub entry: Vec<f64>,
    /// Unit vector pointing from the manifold into the flow domain.
    pub inward: Vec<f64>,
    /// Default neighbourhood of width 0.05.
    pub gate: NeighbourhoodSpec,
}

impl ModelFlow {
    pub fn system(&self) -> &FlowSystem {
        &self.model.system
    }

    pub fn manifold(&self) -> &FlatManifold {
        &self.model.manifold
    }

    pub fn reduced(&self) -> &FlowSystem {
        &self.model.reduced
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn solid_body_params(&self) -> Option<SolidBodyParams> {
        (self.id == FlowId::SolidBody).then(|| SolidBodyParams {
            alpha: self.param("alpha"),
            beta: self.param("beta"),
        })
    }

    pub fn km_params(&self) -> Option<KuhlmannMuldoonParams> {
        (self.id == FlowId::KuhlmannMuldoon).then(|| KuhlmannMuldoonParams {
            alpha_s: self.param("alpha_s"),
            eta: self.param("eta"),
        })
    }
}

/// Resolves defaults, applies `overrides` and builds the flow.
pub fn build(id: FlowId, overrides: &BTreeMap<String, f64>) -> Result<ModelFlow> {
    let mut params: BTreeMap<String, f64> = id.defaults().iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::UnknownParam {
                    flow: id.to_string(),
                    name: k.clone(),
                })
            }
        }
    }
    match id {
        FlowId::SolidBody => {
            let p = SolidBodyParams::new(params["alpha"], params["beta"])?;
            let b = params["b"];
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid(format!(
                    "entry offset b must be finite and nonnegative, got {b}"
                )));
            }
            Ok(ModelFlow {
                id,
                model: solid_body(p)?,
                entry: vec![-b, 0.0],
                inward: vec![0.0, 1.0],
                gate: NeighbourhoodSpec::new(1, 0.0, 0.05)?,
                params,
            })
        }
        FlowId::KuhlmannMuldoon => {
            let p = KuhlmannMuldoonParams::new(params["alpha_s"], params["eta"])?;
            let z2 = params["z2_0"];
            if !(z2 > -0.5 && z2 < 0.5) {
                return Err(invalid(format!("z2_0 must lie in (-1/2, 1/2), got {z2}")));
            }
            Ok(ModelFlow {
                id,
                model: kuhlmann_muldoon(p)?,
                entry: vec![KM_SURFACE, z2],
                inward: vec![-1.0, 0.0],
                gate: NeighbourhoodSpec::new(0, KM_SURFACE - 0.05, KM_SURFACE)?,
                params,
            })
        }
    }
}
