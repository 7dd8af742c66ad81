use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// Affine subspace through `base_point` whose orthogonal complement is
/// spanned by orthonormal `normals`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlat")]
pub struct FlatManifold {
    base_point: Vec<f64>,
    normals: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawFlat {
    base_point: Vec<f64>,
    normals: Vec<Vec<f64>>,
}

impl TryFrom<RawFlat> for FlatManifold {
    type Error = Error;

    fn try_from(raw: RawFlat) -> Result<Self> {
        FlatManifold::with_normals(raw.base_point, raw.normals)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FlatManifold {
    /// Codimension-one hyperplane.
    pub fn new(base_point: Vec<f64>, unit_normal: Vec<f64>) -> Result<Self> {
        Self::with_normals(base_point, vec![unit_normal])
    }

    /// The hyperplane `{z_k = value}` in `R^dim`.
    pub fn coordinate(dim: usize, k: usize, value: f64) -> Result<Self> {
        if k >= dim {
            return Err(invalid(format!(
                "coordinate index {k} out of range for dimension {dim}"
            )));
        }
        let mut base = vec![0.0; dim];
        base[k] = value;
        let mut n = vec![0.0; dim];
        n[k] = 1.0;
        Self::new(base, n)
    }

    pub fn with_normals(base_point: Vec<f64>, normals: Vec<Vec<f64>>) -> Result<Self> {
        let d = base_point.len();
        if d < 2 || normals.is_empty() || normals.len() >= d {
            return Err(invalid(
                "flat manifold needs dimension >= 2 and 1 <= codimension < dimension",
            ));
        }
        if base_point.iter().any(|v| !v.is_finite()) {
            return Err(invalid("flat manifold base point must be finite"));
        }
        for (i, n) in normals.iter().enumerate() {
            if n.len() != d {
                return Err(invalid("normal vector dimension differs from base point"));
            }
            for (j, m) in normals.iter().enumerate().take(i + 1) {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot(n, m) - expect).abs() > UNIT_TOL {
                    return Err(invalid("manifold normals must be orthonormal within 1e-12"));
                }
            }
        }
        Ok(FlatManifold { base_point, normals })
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    /// First (for codimension one, the only) unit normal.
    pub fn unit_normal(&self) -> &[f64] {
        &self.normals[0]
    }

    pub fn dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn codim(&self) -> usize {
        self.normals.len()
    }

    /// `⟨p − base, n⟩` for the first normal.
    pub fn signed_offset(&self, p: &[f64]) -> f64 {
        let diff: Vec<f64> = p.iter().zip(&self.base_point).map(|(a, b)| a - b).collect();
        dot(&diff, self.unit_normal())
    }

    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = p.iter().zip(&self.base_point).map(|(a, b)| a - b).collect();
        let mut out = p.to_vec();
        for n in &self.normals {
            let c = dot(&diff, n);
            for (o, ni) in out.iter_mut().zip(n) {
                *o -= c * ni;
            }
        }
        out
    }

    pub fn distance(&self, p: &[f64]) -> f64 {
        let diff: Vec<f64> = p.iter().zip(&self.base_point).map(|(a, b)| a - b).collect();
        self.normals.iter().map(|n| dot(&diff, n).powi(2)).sum::<f64>().sqrt()
    }
}

/// `(y, t) ↦ x`.
pub type GraphFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;
/// `(y, t) ↦ ∂m/∂y`, rows indexed by `x`, columns by `y`.
pub type GraphDerivFn = dyn Fn(&[f64], f64) -> Vec<Vec<f64>> + Send + Sync;

/// Manifold given as a graph `x = m(y, t)` over the tangential coordinates.
/// `normal_coords` lists which state components form `x`; the rest form `y`
/// in increasing order.
#[derive(Clone)]
pub struct GraphManifold {
    dim: usize,
    normal_coords: Vec<usize>,
    tangent_coords: Vec<usize>,
    m: Arc<GraphFn>,
    dm_dy: Arc<GraphDerivFn>,
}

impl GraphManifold {
    pub fn new<M, D>(dim: usize, normal_coords: Vec<usize>, m: M, dm_dy: D) -> Result<Self>
    where
        M: Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        D: Fn(&[f64], f64) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        let mut sorted = normal_coords.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != normal_coords.len()
            || normal_coords.is_empty()
            || normal_coords.len() >= dim
            || sorted.last().is_some_and(|&k| k >= dim)
        {
            return Err(invalid(
                "graph manifold normal coordinates must be distinct, in range, and leave a tangent part",
            ));
        }
        let tangent_coords = (0..dim).filter(|k| !normal_coords.contains(k)).collect();
        Ok(GraphManifold {
            dim,
            normal_coords,
            tangent_coords,
            m: Arc::new(m),
            dm_dy: Arc::new(dm_dy),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normal_coords(&self) -> &[usize] {
        &self.normal_coords
    }

    pub fn tangent_coords(&self) -> &[usize] {
        &self.tangent_coords
    }

    /// Splits a state into its `(x, y)` parts.
    pub fn split(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.normal_coords.iter().map(|&k| p[k]).collect(),
            self.tangent_coords.iter().map(|&k| p[k]).collect(),
        )
    }

    pub fn graph(&self, y: &[f64], t: f64) -> Vec<f64> {
        (self.m)(y, t)
    }

    pub fn graph_derivative(&self, y: &[f64], t: f64) -> Vec<Vec<f64>> {
        (self.dm_dy)(y, t)
    }

    pub fn distance(&self, p: &[f64], t: f64) -> f64 {
        let (x, y) = self.split(p);
        let mx = self.graph(&y, t);
        x.iter().zip(&mx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest deviation between `dm_dy` and central differences of `m` at `y`.
    pub fn derivative_mismatch(&self, y: &[f64], t: f64) -> f64 {
        let d = self.graph_derivative(y, t);
        let mut worst = 0.0f64;
        let mut yp = y.to_vec();
        for j in 0..y.len() {
            let h = 1e-6 * (1.0 + y[j].abs());
            yp[j] = y[j] + h;
            let mp = self.graph(&yp, t);
            yp[j] = y[j] - h;
            let mm = self.graph(&yp, t);
            yp[j] = y[j];
            for i in 0..mp.len() {
                let fd = (mp[i] - mm[i]) / (2.0 * h);
                worst = worst.max((fd - d[i][j]).abs());
            }
        }
        worst
    }
}

impl fmt::Debug for GraphManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphManifold")
            .field("dim", &self.dim)
            .field("normal_coords", &self.normal_coords)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum ManifoldSpec {
    Flat(FlatManifold),
    Graph(GraphManifold),
}

impl ManifoldSpec {
    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Flat(f) => f.dim(),
            ManifoldSpec::Graph(g) => g.dim(),
        }
    }

    pub fn distance(&self, p: &[f64], t: f64) -> f64 {
        match self {
            ManifoldSpec::Flat(f) => f.distance(p),
            ManifoldSpec::Graph(g) => g.distance(p, t),
        }
    }

    pub fn as_flat(&self) -> Option<&FlatManifold> {
        match self {
            ManifoldSpec::Flat(f) => Some(f),
            ManifoldSpec::Graph(_) => None,
        }
    }
}

impl From<FlatManifold> for ManifoldSpec {
    fn from(f: FlatManifold) -> Self {
        ManifoldSpec::Flat(f)
    }
}

impl From<GraphManifold> for ManifoldSpec {
    fn from(g: GraphManifold) -> Self {
        ManifoldSpec::Graph(g)
    }
}

/// Orthogonal projection onto a flat manifold.
pub fn project_to_manifold(m: &ManifoldSpec, p: &[f64]) -> Result<Vec<f64>> {
    match m {
        ManifoldSpec::Flat(f) => {
            if p.len() != f.dim() {
                return Err(invalid("point dimension differs from manifold"));
            }
            Ok(f.project(p))
        }
        ManifoldSpec::Graph(_) => Err(Error::UnsupportedManifold("projection onto graph manifolds")),
    }
}
