use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FlowModel;
use crate::dynsys::{DomainBox, FlatManifold, FlowSystem};
use crate::error::{invalid, Error, Result};
use crate::smallalg::Mat;

/// Radius of the free surface `{z1 = 3/2}`.
pub const KM_SURFACE: f64 = 1.5;

/// Parameters of the Kuhlmann-Muldoon planar model flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KuhlmannMuldoonParams {
    /// Asymmetry parameter.
    pub alpha_s: f64,
    /// Radial shape exponent, in `[4, 5]`.
    pub eta: f64,
}

impl KuhlmannMuldoonParams {
    pub fn new(alpha_s: f64, eta: f64) -> Result<Self> {
        let p = KuhlmannMuldoonParams { alpha_s, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha_s.is_finite() || !(4.0..=5.0).contains(&self.eta) {
            return Err(invalid(format!(
                "km parameters need finite alpha_s and eta in [4, 5] (alpha_s = {}, eta = {})",
                self.alpha_s, self.eta
            )));
        }
        Ok(())
    }

    fn map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("alpha_s".to_string(), self.alpha_s), ("eta".to_string(), self.eta)])
    }
}

fn domain_err(z: &[f64]) -> Error {
    Error::Domain {
        flow: "km".into(),
        t: f64::NAN,
        state: z.to_vec(),
    }
}

/// `(1 − 2z1/3)` written so that it vanishes exactly at `z1 = 3/2`.
fn wall_factor(z1: f64) -> f64 {
    (3.0 - 2.0 * z1) / 3.0
}

fn rhs(p: KuhlmannMuldoonParams, z: &[f64]) -> Result<Vec<f64>> {
    let (z1, z2) = (z[0], z[1]);
    if !(z1 > 0.0) {
        return Err(domain_err(z));
    }
    let eta = p.eta;
    let s = (PI * z2).sin() - 2.0 * p.alpha_s * (2.0 * PI * z2).cos();
    let c = (PI * z2).cos() + p.alpha_s * (2.0 * PI * z2).sin();
    let radial = (eta + 1.0) * z1.powf(eta - 1.0) - 2.0 / 3.0 * (eta + 2.0) * z1.powf(eta);
    Ok(vec![PI * z1.powf(eta) * wall_factor(z1) * s, radial * c])
}

fn jacobian(p: KuhlmannMuldoonParams, z: &[f64]) -> Result<Mat> {
    let (z1, z2) = (z[0], z[1]);
    if !(z1 > 0.0) {
        return Err(domain_err(z));
    }
    let (eta, a) = (p.eta, p.alpha_s);
    let (sp, cp) = (PI * z2).sin_cos();
    let (s2, c2) = (2.0 * PI * z2).sin_cos();
    let s = sp - 2.0 * a * c2;
    let c = cp + a * s2;
    let ds = PI * cp + 4.0 * PI * a * s2;
    let dc = -PI * sp + 2.0 * PI * a * c2;
    let z1e = z1.powf(eta);
    let z1em1 = z1.powf(eta - 1.0);
    let radial = (eta + 1.0) * z1em1 - 2.0 / 3.0 * (eta + 2.0) * z1e;
    let d_radial = (eta + 1.0) * (eta - 1.0) * z1.powf(eta - 2.0) - 2.0 / 3.0 * (eta + 2.0) * eta * z1em1;
    let d11 = PI * s * (eta * z1em1 * wall_factor(z1) - 2.0 / 3.0 * z1e);
    let d12 = PI * z1e * wall_factor(z1) * ds;
    Mat::from_rows(&[[d11, d12], [d_radial * c, radial * dc]])
}

/// Velocity along the free surface: `z2' = −(3/2)^{η−1}[cos(πz2) + α_s sin(2πz2)]`.
pub fn km_surface_speed(p: KuhlmannMuldoonParams, z2: f64) -> f64 {
    -KM_SURFACE.powf(p.eta - 1.0) * ((PI * z2).cos() + p.alpha_s * (2.0 * PI * z2).sin())
}

/// The field, the free surface `{z1 = 3/2}` with normal `(1, 0)`, and the
/// surface dynamics embedded in the plane.
pub fn kuhlmann_muldoon(p: KuhlmannMuldoonParams) -> Result<FlowModel> {
    p.validate()?;
    let domain = DomainBox::new(vec![0.0, -0.5], vec![KM_SURFACE, 0.5])?;
    let system = FlowSystem::new("km", 2, move |z, _| rhs(p, z))
        .with_jacobian(move |z, _| jacobian(p, z))
        .with_params(p.map())
        .with_domain(domain.clone());
    let reduced = FlowSystem::new("km/surface", 2, move |z, _| Ok(vec![0.0, km_surface_speed(p, z[1])]))
        .with_jacobian(move |z, _| {
            let d = -KM_SURFACE.powf(p.eta - 1.0)
                * (-PI * (PI * z[1]).sin() + 2.0 * PI * p.alpha_s * (2.0 * PI * z[1]).cos());
            Mat::from_rows(&[[0.0, 0.0], [0.0, d]])
        })
        .with_params(p.map())
        .with_domain(domain);
    Ok(FlowModel {
        system,
        manifold: FlatManifold::coordinate(2, 0, KM_SURFACE)?,
        reduced,
    })
}

/// Normal-rate integrand along the surface in closed form,
/// `−(2/3)^{1−η} π [2α_s cos(2πγ2) − sin(πγ2)]`.
///
/// This is the negative of the geometric NILE with normal `(1, 0)`, so the
/// two balance functions share their zeros.
pub fn nile_integrand_km(gamma2: f64, p: KuhlmannMuldoonParams) -> f64 {
    -(2.0f64 / 3.0).powf(1.0 - p.eta) * PI * (2.0 * p.alpha_s * (2.0 * PI * gamma2).cos() - (PI * gamma2).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> KuhlmannMuldoonParams {
        KuhlmannMuldoonParams::new(0.1, 4.74).unwrap()
    }

    #[test]
    fn surface_is_invariant() {
        let m = kuhlmann_muldoon(params()).unwrap();
        for z2 in [-0.49, -0.2, 0.0, 0.3, 0.4999] {
            assert_eq!(m.system.eval(&[1.5, z2], 0.0).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn restriction_equals_surface_flow() {
        let p = params();
        let m = kuhlmann_muldoon(p).unwrap();
        for z2 in [-0.4, 0.0, 0.25, 0.4] {
            let full = m.system.eval(&[1.5, z2], 0.0).unwrap()[1];
            let red = m.reduced.eval(&[1.5, z2], 0.0).unwrap()[1];
            assert!((full - red).abs() <= 1e-14 * red.abs().max(1.0));
        }
    }

    #[test]
    fn surface_speed_at_midplane() {
        // (3/2)^3.74 = exp(3.74 ln 1.5)
        let expect = -(3.74 * 1.5f64.ln()).exp();
        assert!((km_surface_speed(params(), 0.0) - expect).abs() < 1e-12);
        assert!((expect + 4.5560).abs() < 1e-4);
    }

    #[test]
    fn literal_integrand_values() {
        let p = KuhlmannMuldoonParams::new(0.5, 4.74).unwrap();
        let v = nile_integrand_km(0.0, p);
        assert!((v + PI * 1.5f64.powf(3.74)).abs() < 1e-12);
        assert!((v + 14.313).abs() < 1e-3);
        assert_eq!(
            nile_integrand_km(0.0, KuhlmannMuldoonParams::new(0.0, 4.74).unwrap()),
            0.0
        );
    }

    #[test]
    fn literal_integrand_is_negated_geometric_rate() {
        let p = params();
        let m = kuhlmann_muldoon(p).unwrap();
        for z2 in [-0.3, 0.05, 0.33] {
            let sigma = m.system.jacobian(&[1.5, z2], 0.0).unwrap()[(0, 0)];
            assert!((sigma + nile_integrand_km(z2, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let m = kuhlmann_muldoon(params()).unwrap();
        assert!(matches!(m.system.eval(&[0.0, 0.1], 0.0), Err(Error::Domain { .. })));
        assert!(m.system.jacobian(&[-1.0, 0.1], 0.0).is_err());
    }

    #[test]
    fn eta_range() {
        assert!(KuhlmannMuldoonParams::new(0.1, 3.9).is_err());
        assert!(KuhlmannMuldoonParams::new(0.1, 5.0).is_ok());
    }
}
