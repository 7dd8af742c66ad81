//! Dense kernels for small square matrices (d ≤ 16).
//!
//! Everything here is pure and allocation-light: the balance functions call
//! these once per time sample, so the matrices are the Jacobians of planar or
//! low-dimensional flows and their fundamental solutions.

mod eigen;
mod expm;
mod jacobi;

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use eigen::eigenvalues;
pub use expm::{expm, EXPM_NORM_LIMIT};
pub use jacobi::{singular_values, sym_eigen_max, sym_eigenvalues};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 16;

pub(crate) const ATOL: f64 = 1e-12;
pub(crate) const RTOL: f64 = 1e-10;

/// Square real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    dim: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Mat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Mat { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(invalid(format!("row {i} has {} entries, expected {dim}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Mat::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(invalid("matrix has non-finite entries"))
        }
    }

    pub(crate) fn check_dim(&self) -> Result<()> {
        if self.dim > MAX_DIM {
            Err(invalid(format!("matrix dimension {} exceeds {MAX_DIM}", self.dim)))
        } else {
            Ok(())
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.dim, |i, j| self[(j, i)])
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetric_part(&self) -> Mat {
        Mat::from_fn(self.dim, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Entrywise equality within `atol + rtol·max|entry|`.
    pub fn approx_eq(&self, other: &Mat) -> bool {
        let scale = self.data.iter().chain(&other.data).fold(0.0f64, |m, v| m.max(v.abs()));
        self.dim == other.dim && self.max_abs_diff(other) <= ATOL + RTOL * scale
    }

    pub fn is_symmetric(&self) -> bool {
        self.approx_eq(&self.transpose())
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "dimension mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(self.mul_vec(v)).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Mat {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Mat {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))
                .unwrap_or(k);
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        det
    }

    /// Solves `self · X = rhs` for a square right-hand side matrix.
    pub(crate) fn solve(&self, rhs: &Mat) -> Option<Mat> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut b = rhs.data.clone();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))?;
            if a[p * n + k] == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                    b.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                for j in 0..n {
                    b[i * n + j] -= f * b[k * n + j];
                }
            }
        }
        for k in (0..n).rev() {
            let pivot = a[k * n + k];
            for j in 0..n {
                let mut s = b[k * n + j];
                for m in k + 1..n {
                    s -= a[k * n + m] * b[m * n + j];
                }
                b[k * n + j] = s / pivot;
            }
        }
        Some(Mat { dim: n, data: b })
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.dim).map(|i| self.row(i)).collect();
        f.debug_struct("Mat")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Eigenvalues of a real matrix, sorted by descending real part and then by
/// descending imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    /// False when the QR iteration hit its sweep cap; the values are then
    /// the best available approximations.
    pub converged: bool,
}

impl Spectrum {
    pub(crate) fn sorted(mut values: Vec<Complex64>, converged: bool) -> Self {
        values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Spectrum { values, converged }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Singular values in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularValues {
    pub values: Vec<f64>,
}
