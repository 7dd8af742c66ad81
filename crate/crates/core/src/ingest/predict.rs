use super::Extrapolation;
use crate::balance::BalanceSeries;
use crate::smallalg::Mat;

/// Extrapolates the trailing `window` samples of `series` with a
/// least-squares polynomial and returns its smallest real root after the
/// last sample time.
///
/// `None` when extrapolation is off, the window is too short or exceeds the
/// series, the fit is rank-deficient, or no later root exists.
pub fn predict_next_zero(series: &BalanceSeries, mode: Extrapolation, window: usize) -> Option<f64> {
    let degree = mode.degree()?;
    if window < degree + 1 || window > series.len() {
        return None;
    }
    let start = series.len() - window;
    let (t, v) = (&series.times[start..], &series.values[start..]);
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    // shift and scale time for conditioning
    let t_last = *t.last().unwrap();
    let scale = (t_last - t[0]).max(f64::MIN_POSITIVE);
    let s: Vec<f64> = t.iter().map(|x| (x - t_last) / scale).collect();
    let k = degree + 1;
    let mut normal = Mat::zeros(k);
    let mut rhs = vec![0.0; k];
    for (&si, &vi) in s.iter().zip(v) {
        let pw: Vec<f64> = (0..k).map(|p| si.powi(p as i32)).collect();
        for i in 0..k {
            rhs[i] += pw[i] * vi;
            for j in 0..k {
                normal[(i, j)] += pw[i] * pw[j];
            }
        }
    }
    let mut b = Mat::zeros(k);
    for (i, r) in rhs.iter().enumerate() {
        b[(i, 0)] = *r;
    }
    let x = normal.solve(&b)?;
    let c: Vec<f64> = (0..k).map(|i| x[(i, 0)]).collect();
    if c.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let root = smallest_positive_root(&c)?;
    Some(t_last + root * scale)
}

/// Smallest root `> 0` of `c0 + c1 s (+ c2 s²)`.
fn smallest_positive_root(c: &[f64]) -> Option<f64> {
    let tiny = 1e-14 * c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let linear = |c0: f64, c1: f64| (c1.abs() > tiny).then(|| -c0 / c1).filter(|&r| r > 0.0);
    match *c {
        [c0, c1] => linear(c0, c1),
        [c0, c1, c2] => {
            if c2.abs() <= tiny {
                return linear(c0, c1);
            }
            let disc = c1 * c1 - 4.0 * c2 * c0;
            if disc < 0.0 {
                return None;
            }
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            let mut roots = vec![q / c2];
            if q != 0.0 {
                roots.push(c0 / q);
            }
            roots.into_iter().filter(|&r| r > 0.0).min_by(f64::total_cmp)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::BalanceKind;

    fn series(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> BalanceSeries {
        let t: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let v = t.iter().map(|&x| f(x)).collect();
        BalanceSeries::new(BalanceKind::Nile, a, vec![], t, v, None).unwrap()
    }

    #[test]
    fn quadratic_is_exact() {
        let s = series(|t| t * t - 2.0 * t, 0.0, 1.2, 61);
        let z = predict_next_zero(&s, Extrapolation::Quadratic, 25).unwrap();
        assert!((z - 2.0).abs() < 1e-9, "{z}");
    }

    #[test]
    fn linear_trend() {
        let s = series(|t| t * t - 2.0 * t, 0.0, 1.2, 61);
        let z = predict_next_zero(&s, Extrapolation::Linear, 5).unwrap();
        // the fitted slope is the derivative 0.32 at the window midpoint
        assert!((z - (1.2 + 0.96 / 0.32)).abs() < 1e-2, "{z}");
        let l = series(|t| 3.0 - t, 0.0, 1.0, 11);
        assert!((predict_next_zero(&l, Extrapolation::Linear, 4).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_prediction_cases() {
        let up = series(|t| 1.0 + t, 0.0, 1.0, 30);
        assert!(predict_next_zero(&up, Extrapolation::Quadratic, 25).is_none());
        assert!(predict_next_zero(&up, Extrapolation::Linear, 25).is_none());
        let s = series(|t| t * t - 2.0 * t, 0.0, 1.2, 10);
        assert!(predict_next_zero(&s, Extrapolation::Quadratic, 25).is_none());
        assert!(predict_next_zero(&s, Extrapolation::None, 5).is_none());
        let flat = series(|_| 0.0, 0.0, 1.0, 30);
        assert!(predict_next_zero(&flat, Extrapolation::Quadratic, 25).is_none());
    }
}
