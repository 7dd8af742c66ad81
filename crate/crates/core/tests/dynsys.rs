use std::collections::BTreeMap;

use entryexit::dynsys::{
    cumulative_quadrature, integrate, integrate_variational, project_to_manifold, FlatManifold, ManifoldSpec,
};
use entryexit::flows::{build, FlowId, ModelFlow};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn solid(alpha: f64, beta: f64) -> ModelFlow {
    build(
        FlowId::SolidBody,
        &BTreeMap::from([("alpha".into(), alpha), ("beta".into(), beta)]),
    )
    .unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_map_composes(
        alpha in 0.5..3.0f64,
        beta in 0.5..3.0f64,
        z1 in -2.0..2.0f64,
        z2 in 0.1..1.0f64,
        t1 in 0.1..2.0f64,
        dt in 0.1..2.0f64,
    ) {
        let f = solid(alpha, beta);
        let t2 = t1 + dt;
        let direct = integrate(f.system(), &[z1, z2], 0.0, t2, TOL).unwrap();
        let half = integrate(f.system(), &[z1, z2], 0.0, t1, TOL).unwrap();
        let rest = integrate(f.system(), half.trajectory.last_state(), t1, t2, TOL).unwrap();
        let err = dist(direct.trajectory.last_state(), rest.trajectory.last_state());
        let scale = 1.0 + direct.trajectory.last_state().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err <= 10.0 * TOL * scale, "{err:e}");
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        normal in prop::collection::vec(-1.0..1.0f64, 3),
        base in prop::collection::vec(-2.0..2.0f64, 3),
        p in prop::collection::vec(-5.0..5.0f64, 3),
        q in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let n = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let unit: Vec<f64> = normal.iter().map(|x| x / n).collect();
        let m: ManifoldSpec = FlatManifold::new(base, unit).unwrap().into();
        let pp = project_to_manifold(&m, &p).unwrap();
        let qq = project_to_manifold(&m, &q).unwrap();
        prop_assert!(dist(&project_to_manifold(&m, &pp).unwrap(), &pp) <= 1e-12);
        prop_assert!(dist(&pp, &qq) <= dist(&p, &q) * (1.0 + 1e-12) + 1e-12);
        prop_assert!(m.distance(&pp, 0.0) <= 1e-12);
    }
}

/// `‖φ(z0 + ζ) − φ(z0) − Φζ‖ ≤ C‖ζ‖²` with `C` measured at a larger offset.
#[test]
fn variational_equation_is_the_linearization() {
    let f = solid(2.0, 1.0);
    let tight = 1e-13;
    let z0 = [-1.0, 0.3];
    let t_end = 1.5;
    let base = integrate(f.system(), &z0, 0.0, t_end, tight).unwrap();
    let phi = integrate_variational(f.system(), &base.trajectory, 0.0, t_end, tight)
        .unwrap()
        .at(t_end)
        .unwrap();
    let end = base.trajectory.last_state().to_vec();
    let residual = |h: f64| {
        let dir = [0.6, 0.8];
        let z: Vec<f64> = z0.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        let moved = integrate(f.system(), &z, 0.0, t_end, tight).unwrap();
        let lin = phi.mul_vec(&[h * dir[0], h * dir[1]]);
        let r: Vec<f64> = (0..2)
            .map(|i| moved.trajectory.last_state()[i] - end[i] - lin[i])
            .collect();
        r.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let (r1, r2) = (residual(1e-3), residual(5e-4));
    let c = r1 / 1e-6;
    // halving the offset quarters the residual
    assert!((r1 / r2 - 4.0).abs() < 0.2, "{r1:e} {r2:e}");
    let small = residual(1e-6);
    assert!(small <= 2.0 * c * 1e-12 + 1e-12, "{small:e} vs C = {c}");
}

/// `det Φ(t) = exp(∫ tr A)` along an orbit off the wall.
#[test]
fn liouville_formula() {
    for (alpha, beta, z0) in [(2.0, 1.0, [-1.0, 0.5]), (0.7, 2.5, [0.4, 1.2]), (3.0, 0.6, [-2.0, 0.1])] {
        let f = solid(alpha, beta);
        let t_end = 3.0;
        let run = integrate(f.system(), &z0, 0.0, t_end, 1e-12).unwrap();
        let fund = integrate_variational(f.system(), &run.trajectory, 0.0, t_end, 1e-12).unwrap();
        let grid: Vec<f64> = (0..=3000).map(|k| t_end * k as f64 / 3000.0).collect();
        let tr: Vec<f64> = grid
            .iter()
            .map(|&t| f.system().jacobian(&run.trajectory.at(t).unwrap(), t).unwrap().trace())
            .collect();
        let integral = *cumulative_quadrature(&grid, &tr).unwrap().last().unwrap();
        let det = fund.at(t_end).unwrap().det();
        assert!(
            (det / integral.exp() - 1.0).abs() <= 1e-4,
            "{det} vs {}",
            integral.exp()
        );
    }
}

/// Fixed-step RK4 on the rotating field agrees with the adaptive solver.
#[test]
fn adaptive_solver_matches_fine_rk4() {
    let f = solid(2.0, 1.0);
    let rhs = |z: &[f64]| f.system().eval(z, 0.0).unwrap();
    let (t_end, n) = (4.0, 40_000);
    let h = t_end / n as f64;
    let mut z = vec![-1.0, 0.4];
    for _ in 0..n {
        let k1 = rhs(&z);
        let k2 = rhs(&[z[0] + h / 2.0 * k1[0], z[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(&[z[0] + h / 2.0 * k2[0], z[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(&[z[0] + h * k3[0], z[1] + h * k3[1]]);
        for i in 0..2 {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let run = integrate(f.system(), &[-1.0, 0.4], 0.0, t_end, 1e-12).unwrap();
    assert!(dist(run.trajectory.last_state(), &z) < 1e-9);
}
