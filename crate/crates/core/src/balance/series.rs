use log::debug;

use super::tracking::track_branch;
use super::{BalanceKind, BalanceSeries, FtleMode};
use crate::dynsys::{
    cumulative_quadrature, cumulative_trapezoid, integrate_linear, FlowSystem, IntegratorOptions, ManifoldSpec,
    Trajectory,
};
use crate::error::{invalid, Error, Result};
use crate::flows::FastSlowSystem;
use crate::smallalg::{eigenvalues, expm, singular_values, sym_eigen_max, Mat};

/// Fraction of unconverged eigenvalue samples tolerated before a series is
/// rejected.
const MAX_UNCONVERGED_FRACTION: f64 = 0.01;

/// A time-dependent matrix family `t ↦ A(t)`.
pub trait Linearization {
    fn matrix(&self, t: f64) -> Result<Mat>;
}

impl<F> Linearization for F
where
    F: Fn(f64) -> Result<Mat>,
{
    fn matrix(&self, t: f64) -> Result<Mat> {
        self(t)
    }
}

/// `A(t) = D_z h(γ(t), t)`.
#[derive(Clone, Copy, Debug)]
pub struct AlongTrajectory<'a> {
    pub flow: &'a FlowSystem,
    pub gamma: &'a Trajectory,
}

impl Linearization for AlongTrajectory<'_> {
    fn matrix(&self, t: f64) -> Result<Mat> {
        self.flow.jacobian(&self.gamma.at(t)?, t)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(invalid("balance grid needs at least two points"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("balance grid must be finite and strictly increasing"));
    }
    Ok(())
}

fn check_on_manifold(manifold: &ManifoldSpec, gamma: &Trajectory, grid: &[f64]) -> Result<()> {
    for &t in [grid[0], grid[grid.len() / 2], *grid.last().unwrap()].iter() {
        let p = gamma.at(t)?;
        if manifold.distance(&p, t) > on_manifold_tol(&p) {
            return Err(invalid(format!("reference trajectory leaves the manifold at t = {t}")));
        }
    }
    Ok(())
}

fn on_manifold_tol(p: &[f64]) -> f64 {
    1e-10 * (1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn integral_series(kind: BalanceKind, t0: f64, z0: Vec<f64>, grid: &[f64], rate: Vec<f64>) -> Result<BalanceSeries> {
    let values = cumulative_quadrature(grid, &rate)?;
    BalanceSeries::new(kind, t0, z0, grid.to_vec(), values, Some(rate))
}

/// `F_{λ_j}(t) = ∫ Re λ_j(A(s)) ds` for an explicit matrix family.
pub fn series_instant_eig_with(
    lin: &impl Linearization,
    branch: usize,
    grid: &[f64],
    z0: Vec<f64>,
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    let mut spectra = Vec::with_capacity(grid.len());
    for &t in grid {
        spectra.push(eigenvalues(&lin.matrix(t)?)?);
    }
    let dim = spectra[0].len();
    if branch >= dim {
        return Err(invalid(format!(
            "eigenvalue index {branch} out of range for dimension {dim}"
        )));
    }
    let unconverged = spectra.iter().filter(|s| !s.converged).count();
    if unconverged as f64 > MAX_UNCONVERGED_FRACTION * grid.len() as f64 {
        return Err(Error::DegradedQuality {
            failed: unconverged,
            total: grid.len(),
        });
    }
    let (values, ambiguous) = track_branch(&spectra, branch);
    if ambiguous > 0 {
        debug!("eigenvalue branches touched or crossed at {ambiguous} steps; ranked by real part there");
    }
    let rate: Vec<f64> = values.iter().map(|v| v.re).collect();
    let mut s = integral_series(BalanceKind::InstantEig { index: branch }, grid[0], z0, grid, rate)?;
    s.flags.unconverged = unconverged;
    s.flags.ambiguous_crossings = ambiguous;
    Ok(s)
}

/// Instantaneous-eigenvalue balance along a reference trajectory on `manifold`.
pub fn series_instant_eig(
    flow: &FlowSystem,
    manifold: &ManifoldSpec,
    gamma: &Trajectory,
    branch: usize,
    grid: &[f64],
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    check_on_manifold(manifold, gamma, grid)?;
    let z0 = gamma.at(grid[0])?;
    series_instant_eig_with(&AlongTrajectory { flow, gamma }, branch, grid, z0)
}

/// `F_{ρ_j}(t) = ∫ Re ρ_j(s) ds` with `ρ_j` the eigenvalues of `D_x f` along a
/// slow trajectory on the critical manifold.
pub fn series_fastslow(
    fs: &FastSlowSystem,
    gamma_slow: &Trajectory,
    branch: usize,
    grid: &[f64],
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    let lin = |t: f64| fs.fast_jacobian(&gamma_slow.at(t)?);
    let z0 = gamma_slow.at(grid[0])?;
    let mut s = series_instant_eig_with(&lin, branch, grid, z0)?;
    s.kind = BalanceKind::FastSlow { index: branch };
    Ok(s)
}

/// `l_j(t) = ln δ_j(t) / (t − t0)` on `grid[1..]`, with `t0 = grid[0]`.
///
/// Vanishing singular values give `−∞`; fundamental matrices that overflow
/// give `+∞`. Both are kept as sentinels and skipped by the root finder.
pub fn series_ftle_with(
    lin: &impl Linearization,
    dim: usize,
    branch: usize,
    mode: FtleMode,
    grid: &[f64],
    tol: f64,
    z0: Vec<f64>,
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    if branch >= dim {
        return Err(invalid(format!(
            "singular value index {branch} out of range for dimension {dim}"
        )));
    }
    let t0 = grid[0];
    let phis: Vec<Option<Mat>> = match mode {
        FtleMode::Exact => {
            let opts = IntegratorOptions::with_tol(tol).stops(grid.to_vec());
            let fund = integrate_linear(|t| lin.matrix(t), dim, t0, *grid.last().unwrap(), &opts)?;
            grid[1..]
                .iter()
                .map(|&t| {
                    if t <= fund.t_end() {
                        fund.at(t).ok().filter(Mat::is_finite)
                    } else {
                        None
                    }
                })
                .collect()
        }
        FtleMode::Commuting => {
            let mats: Vec<Mat> = grid.iter().map(|&t| lin.matrix(t)).collect::<Result<_>>()?;
            let mut integrals = vec![Mat::zeros(dim); grid.len()];
            for r in 0..dim {
                for c in 0..dim {
                    let entry: Vec<f64> = mats.iter().map(|m| m[(r, c)]).collect();
                    for (k, v) in cumulative_quadrature(grid, &entry)?.into_iter().enumerate() {
                        integrals[k][(r, c)] = v;
                    }
                }
            }
            integrals[1..]
                .iter()
                .map(|g| match expm(g) {
                    Ok(m) if m.is_finite() => Ok(Some(m)),
                    Ok(_) | Err(Error::Range { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?
        }
    };
    let mut values = Vec::with_capacity(phis.len());
    for (phi, &t) in phis.iter().zip(&grid[1..]) {
        let v = match phi {
            Some(m) => {
                let delta = singular_values(m)?.values[branch];
                if delta > 0.0 {
                    delta.ln() / (t - t0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::INFINITY,
        };
        values.push(v);
    }
    BalanceSeries::new(
        BalanceKind::Ftle { index: branch, mode },
        t0,
        z0,
        grid[1..].to_vec(),
        values,
        None,
    )
}

/// FTLE series along a reference trajectory.
pub fn series_ftle(
    flow: &FlowSystem,
    gamma: &Trajectory,
    branch: usize,
    mode: FtleMode,
    grid: &[f64],
    tol: f64,
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    let z0 = gamma.at(grid[0])?;
    series_ftle_with(
        &AlongTrajectory { flow, gamma },
        flow.dim(),
        branch,
        mode,
        grid,
        tol,
        z0,
    )
}

/// Normal infinitesimal Lyapunov exponent at a point `p` on the manifold.
///
/// Codimension one: `nᵀ A n`. Higher codimension: the largest eigenvalue of
/// `Nᵀ sym(A) N` over an orthonormal normal basis `N`. Graph manifolds
/// `x = m(y, t)`: the largest eigenvalue of `sym(Γ)` with
/// `Γ = ∂f/∂x − (∂m/∂y)(∂g/∂x)`.
pub fn nile_point(flow: &FlowSystem, manifold: &ManifoldSpec, p: &[f64], t: f64) -> Result<f64> {
    if p.len() != flow.dim() || manifold.dim() != flow.dim() {
        return Err(invalid("point, flow and manifold dimensions disagree"));
    }
    let dist = manifold.distance(p, t);
    if dist > on_manifold_tol(p) {
        return Err(invalid(format!("point {p:?} is {dist:.3e} away from the manifold")));
    }
    let a = flow.jacobian(p, t)?;
    match manifold {
        ManifoldSpec::Flat(m) => {
            let normals = m.normals();
            if normals.len() == 1 {
                return Ok(a.bilinear(&normals[0], &normals[0]));
            }
            let k = normals.len();
            let r = Mat::from_fn(k, |i, j| a.bilinear(&normals[i], &normals[j]));
            sym_eigen_max(&r)
        }
        ManifoldSpec::Graph(g) => {
            let xs = g.normal_coords();
            let ys = g.tangent_coords();
            let (_, y) = g.split(p);
            let dm = g.graph_derivative(&y, t);
            let gamma = Mat::from_fn(xs.len(), |i, j| {
                let coupling: f64 = ys.iter().enumerate().map(|(l, &yl)| dm[i][l] * a[(yl, xs[j])]).sum();
                a[(xs[i], xs[j])] - coupling
            });
            sym_eigen_max(&gamma)
        }
    }
}

/// `F_σ(t) = ∫ σ(γ(s), s) ds`.
pub fn series_nile(
    flow: &FlowSystem,
    manifold: &ManifoldSpec,
    gamma: &Trajectory,
    grid: &[f64],
) -> Result<BalanceSeries> {
    check_grid(grid)?;
    let mut rate = Vec::with_capacity(grid.len());
    let mut z0 = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let p = gamma.at(t)?;
        rate.push(nile_point(flow, manifold, &p, t)?);
        if k == 0 {
            z0 = p;
        }
    }
    integral_series(BalanceKind::Nile, grid[0], z0, grid, rate)
}

/// `F_v(t) = ∫ v(s) ds` with the integrand zeroed wherever `in_gate` is false,
/// accumulated with trapezoids on the sample grid.
pub fn series_velocity(
    times: &[f64],
    normal_velocity: &[f64],
    in_gate: &[bool],
    z0: Vec<f64>,
) -> Result<BalanceSeries> {
    if times.len() != normal_velocity.len() || times.len() != in_gate.len() {
        return Err(invalid("velocity samples, times and gate mask differ in length"));
    }
    if !in_gate.iter().any(|&g| g) {
        return Err(Error::NoSignal);
    }
    let rate: Vec<f64> = normal_velocity
        .iter()
        .zip(in_gate)
        .map(|(&v, &g)| if g { v } else { 0.0 })
        .collect();
    let values = cumulative_trapezoid(times, &rate)?;
    BalanceSeries::new(
        BalanceKind::MeasuredVelocity,
        times[0],
        z0,
        times.to_vec(),
        values,
        Some(rate),
    )
}
