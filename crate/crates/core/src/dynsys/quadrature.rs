use crate::error::{invalid, Result};

fn check(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(invalid("quadrature: times and values differ in length"));
    }
    if times.len() < 2 {
        return Err(invalid("quadrature needs at least two samples"));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(invalid("quadrature: non-finite sample"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("quadrature: times must be strictly increasing"));
    }
    Ok(())
}

/// True when spacing varies by less than `1e-9` relative to the mean step.
pub fn is_uniform(times: &[f64]) -> bool {
    if times.len() < 3 {
        return true;
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
}

/// Running integral with trapezoids; `out[0] = 0`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check(times, values)?;
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// Running integral; `out[0] = 0`.
///
/// Uniform grids with at least three points use composite Simpson at even
/// indices and the exact integral of the local interpolating parabola at odd
/// indices, so the whole series is exact for quadratics. Other grids fall back
/// to trapezoids.
pub fn cumulative_quadrature(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check(times, values)?;
    let n = times.len();
    if n < 3 || !is_uniform(times) {
        return cumulative_trapezoid(times, values);
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    let f = values;
    let mut out = vec![0.0; n];
    for i in 1..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
        } else if i + 1 < n {
            out[i] = out[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1]);
        } else {
            out[i] = out[i - 1] + h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i]);
        }
    }
    Ok(out)
}
