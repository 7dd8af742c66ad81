use super::Mat;
use crate::error::{Error, Result};

/// Inputs with a larger 1-norm are rejected rather than squared into overflow.
pub const EXPM_NORM_LIMIT: f64 = 1e3;

const PADE_ORDER: usize = 6;
// after scaling, ‖A/2^s‖₁ ≤ THETA keeps the [6/6] truncation error below 1e-16
const THETA: f64 = 0.5;

/// Matrix exponential by scaling and squaring with a diagonal [6/6] Padé approximant.
pub fn expm(m: &Mat) -> Result<Mat> {
    m.check_finite()?;
    m.check_dim()?;
    let norm = m.norm_1();
    if norm > EXPM_NORM_LIMIT {
        return Err(Error::Range {
            norm,
            limit: EXPM_NORM_LIMIT,
        });
    }
    let n = m.dim();
    let squarings = if norm > THETA {
        (norm / THETA).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(squarings));

    let mut coeffs = [1.0; PADE_ORDER + 1];
    for k in 1..=PADE_ORDER {
        let (k_f, m_f) = (k as f64, PADE_ORDER as f64);
        coeffs[k] = coeffs[k - 1] * (m_f - k_f + 1.0) / (k_f * (2.0 * m_f - k_f + 1.0));
    }

    let mut num = Mat::identity(n);
    let mut den = Mat::identity(n);
    let mut power = Mat::identity(n);
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = power.matmul(&a);
        let term = power.scale(c);
        num = num.add(&term);
        den = if k % 2 == 0 { den.add(&term) } else { den.sub(&term) };
    }
    let mut result = den
        .solve(&num)
        .ok_or_else(|| Error::InvalidInput("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm(&Mat::zeros(3)).unwrap(), Mat::identity(3));
    }

    #[test]
    fn antisymmetric_generator_is_rotation() {
        let t = 2.0;
        let g = Mat::from_rows(&[[0.0, -t], [t, 0.0]]).unwrap();
        let (s, c) = f64::sin_cos(t);
        let rot = Mat::from_rows(&[[c, -s], [s, c]]).unwrap();
        assert!(expm(&g).unwrap().max_abs_diff(&rot) < 1e-14);
    }

    #[test]
    fn diagonal_exponential() {
        let e = expm(&Mat::diag(&[1.0, 2.0])).unwrap();
        let expect = Mat::diag(&[1f64.exp(), 2f64.exp()]);
        assert!(e.max_abs_diff(&expect) <= 1e-12 * 2f64.exp());
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn large_norm_is_range_error() {
        let err = expm(&Mat::diag(&[2000.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn nilpotent_is_exact() {
        let n = Mat::from_rows(&[[0.0, 3.0], [0.0, 0.0]]).unwrap();
        let e = expm(&n).unwrap();
        assert!(e.max_abs_diff(&Mat::from_rows(&[[1.0, 3.0], [0.0, 1.0]]).unwrap()) < 1e-14);
    }
}
