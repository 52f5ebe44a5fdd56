//! Point clouds and node embeddings.
//!
//! Both are stored row-major in a flat `Vec<f64>`: a point cloud is `n × m`,
//! an embedding is `|V| × m`. The flat layout keeps the nearest-node scan
//! (the hot loop of every fit) a tight slice comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` data points in `R^m` with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    m: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    total_weight: f64,
    diameter: f64,
}

impl PointCloud {
    /// Builds a cloud with unit weights.
    pub fn new(n: usize, m: usize, x: Vec<f64>) -> Result<Self> {
        Self::with_weights(n, m, x, vec![1.0; n])
    }

    pub fn with_weights(n: usize, m: usize, x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidCloud(format!(
                "cloud must have at least one point and one dimension (n={n}, m={m})"
            )));
        }
        if x.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "point cloud entries",
                expected: n * m,
                found: x.len(),
            });
        }
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                what: "point weights",
                expected: n,
                found: w.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite value at point {}, coordinate {}",
                i / m,
                i % m
            )));
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidCloud(format!(
                "weight of point {i} must be finite and positive, got {}",
                w[i]
            )));
        }
        let total_weight = w.iter().sum();
        let diameter = bbox_diagonal(&x, n, m);
        Ok(Self {
            n,
            m,
            x,
            w,
            total_weight,
            diameter,
        })
    }

    /// Builds a unit-weight cloud from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "row length",
                expected: m,
                found: rows[i].len(),
            });
        }
        Self::new(n, m, rows.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.m)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Diagonal of the axis-aligned bounding box; the scale used by the
    /// convergence test of the fitter.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Copies the listed points (and their weights) into a new cloud.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(indices.len() * self.m);
        let mut w = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.point(i));
            w.push(self.w[i]);
        }
        Self::with_weights(indices.len(), self.m, x, w)
    }

    /// Weighted mean of the whole cloud.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.m];
        for (p, &w) in self.points().zip(&self.w) {
            for (acc, v) in mean.iter_mut().zip(p) {
                *acc += w * v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= self.total_weight);
        mean
    }
}

fn bbox_diagonal(x: &[f64], n: usize, m: usize) -> f64 {
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in x.chunks_exact(m).take(n) {
        for k in 0..m {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One position in `R^m` per graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEmbedding {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl NodeEmbedding {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_flat(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                what: "embedding entries",
                expected: rows * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding contains non-finite entries".into()));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "embedding row length",
                expected: dim,
                found: r.len(),
            });
        }
        Self::from_flat(rows.len(), dim, rows.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Keeps the rows whose `map` entry is `Some`, placing each at its new
    /// index. `map` is the old→new index map produced by graph edits.
    pub fn remap(&self, map: &[Option<usize>]) -> Self {
        let rows = map.iter().flatten().count();
        let mut out = Self::zeros(rows, self.dim);
        for (old, new) in map.iter().enumerate() {
            if let Some(new) = new {
                out.row_mut(*new).copy_from_slice(self.row(old));
            }
        }
        out
    }

    /// Largest Euclidean displacement between corresponding rows.
    pub fn max_displacement(&self, other: &Self) -> f64 {
        self.rows()
            .zip(other.rows())
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt()
    }
}
