use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbOptions {
    pub zero_tol: f64,
    pub deriv_tol: f64,
    /// Centered-difference step in `t`.
    pub h_t: f64,
    /// Centered-difference step in `δ`.
    pub h_delta: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        PerturbOptions {
            zero_tol: 1e-8,
            deriv_tol: 1e-6,
            h_t: 1e-5,
            h_delta: 1e-5,
        }
    }
}

/// Leading terms of `T(δ) = T0 + δ T1 + O(δ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub t0: f64,
    pub t1: f64,
    pub df_dt: f64,
    pub df_ddelta: f64,
}

/// First-order correction to a root `t0` of `F(·, 0)` when the balance
/// function depends on a small parameter `δ`.
///
/// Requires `|F(t0, 0)| ≤ zero_tol` and `|∂F/∂t| ≥ deriv_tol`; then
/// `T1 = −(∂F/∂δ)/(∂F/∂t)` by the implicit function theorem.
pub fn perturb_first_order<F>(mut f: F, t0: f64, opts: &PerturbOptions) -> Result<Perturbation>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let f0 = f(t0, 0.0)?;
    if !(f0.abs() <= opts.zero_tol) {
        return Err(Error::Precondition(format!(
            "F(T0, 0) = {f0:e} is not zero within {:e}",
            opts.zero_tol
        )));
    }
    let (ht, hd) = (opts.h_t, opts.h_delta);
    let df_dt = (f(t0 + ht, 0.0)? - f(t0 - ht, 0.0)?) / (2.0 * ht);
    if !(df_dt.abs() >= opts.deriv_tol) {
        return Err(Error::Precondition(format!(
            "dF/dt = {df_dt:e} at T0 is below {:e}; the root is degenerate",
            opts.deriv_tol
        )));
    }
    let df_ddelta = (f(t0, hd)? - f(t0, -hd)?) / (2.0 * hd);
    Ok(Perturbation {
        t0,
        t1: -df_ddelta / df_dt,
        df_dt,
        df_ddelta,
    })
}
