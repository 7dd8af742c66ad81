//! Jacobi rotations for symmetric eigenvalues and singular values.

use super::{Mat, SingularValues};
use crate::error::Result;

const MAX_SWEEPS: usize = 100;
const OFF_TOL: f64 = 1e-14;

/// Eigenvalues of the symmetric part `(M + Mᵀ)/2`, descending.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    m.check_finite()?;
    m.check_dim()?;
    let mut a = m.symmetric_part();
    cyclic_jacobi(&mut a);
    let mut ev: Vec<f64> = (0..a.dim()).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn sym_eigen_max(m: &Mat) -> Result<f64> {
    Ok(sym_eigenvalues(m)?[0])
}

fn off_norm(a: &Mat) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn cyclic_jacobi(a: &mut Mat) {
    let n = a.dim();
    let scale = a.frobenius().max(1.0);
    for _ in 0..MAX_SWEEPS {
        if off_norm(a) < OFF_TOL * scale {
            return;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
}

/// Singular values of `m`, descending.
///
/// The Jacobi rotations that diagonalize `MᵀM` are applied to the columns of
/// `M` directly (one-sided Jacobi), so small singular values keep their
/// relative accuracy instead of drowning in the squared condition number.
pub fn singular_values(m: &Mat) -> Result<SingularValues> {
    m.check_finite()?;
    m.check_dim()?;
    let n = m.dim();
    // columns of M
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| m[(i, j)]).collect()).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma == 0.0 || gamma.abs() <= OFF_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (u, v) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (a, b) = (*u, *v);
                    *u = c * a - s * b;
                    *v = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(SingularValues { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_max() {
        assert_eq!(sym_eigen_max(&Mat::diag(&[-2.0, 5.0])).unwrap(), 5.0);
    }

    #[test]
    fn swap_matrix() {
        let m = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((sym_eigen_max(&m).unwrap() - 1.0).abs() < 1e-15);
        let ev = sym_eigenvalues(&m).unwrap();
        assert!((ev[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn solid_body_symmetrized_jacobian() {
        // A = [[0,-1],[1, alpha(beta t - b)]] at alpha=2, beta=1, b=1, t=0
        let a = Mat::from_rows(&[[0.0, -1.0], [1.0, -2.0]]).unwrap();
        // symmetric part [[0,0],[0,-2]] by hand
        assert_eq!(sym_eigen_max(&a).unwrap(), 0.0);
    }

    #[test]
    fn rotation_singular_values() {
        for angle in [0.3, 1.0, 2.0, -4.1] {
            let (s, c) = f64::sin_cos(angle);
            let r = Mat::from_rows(&[[c, -s], [s, c]]).unwrap();
            let sv = singular_values(&r).unwrap();
            assert!(sv.values.iter().all(|v| (v - 1.0).abs() < 1e-12), "{sv:?}");
        }
    }

    #[test]
    fn diagonal_singular_values() {
        let sv = singular_values(&Mat::diag(&[3.0, -2.0])).unwrap();
        assert_eq!(sv.values, vec![3.0, 2.0]);
    }

    #[test]
    fn shear_singular_values() {
        let m = Mat::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let sv = singular_values(&m).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sv.values[0] - golden).abs() < 1e-14);
        assert!((sv.values[1] - 2.0 / (1.0 + 5f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn tiny_singular_value_keeps_relative_accuracy() {
        let m = Mat::diag(&[1e10, 1e-10]);
        let sv = singular_values(&m).unwrap();
        assert!((sv.values[1] / 1e-10 - 1.0).abs() < 1e-14);
    }
}
