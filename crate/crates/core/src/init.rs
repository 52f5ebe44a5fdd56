//! Principal-component seeds for growing graphs.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{NodeEmbedding, PointCloud};
use crate::error::{Error, Result};
use crate::graph::ElasticGraph;

/// Leading principal directions of a weighted cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAxes {
    pub mean: Vec<f64>,
    /// Unit directions, by decreasing variance.
    pub axes: Vec<Vec<f64>>,
    /// Standard deviation along each axis.
    pub sdev: Vec<f64>,
}

impl PrincipalAxes {
    /// Coordinates of `p` on the requested axes.
    pub fn project(&self, p: &[f64], which: &[usize]) -> Vec<f64> {
        which
            .iter()
            .map(|&k| {
                self.axes[k]
                    .iter()
                    .zip(p)
                    .zip(&self.mean)
                    .map(|((a, x), m)| a * (x - m))
                    .sum()
            })
            .collect()
    }
}

pub(crate) fn weighted_covariance(cloud: &PointCloud) -> (Vec<f64>, DMatrix<f64>) {
    let m = cloud.dim();
    let mean = cloud.mean();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    let mut centered = vec![0.0; m];
    for (p, &w) in cloud.points().zip(cloud.weights()) {
        for k in 0..m {
            centered[k] = p[k] - mean[k];
        }
        for a in 0..m {
            let ca = w * centered[a];
            for b in a..m {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / cloud.total_weight();
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

/// Flips `v` so that its first nonzero component is positive.
fn canonical_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// The `count` leading principal axes of the cloud.
pub fn principal_axes(cloud: &PointCloud, count: usize) -> Result<PrincipalAxes> {
    if cloud.len() < 2 {
        return Err(Error::DegenerateData("at least two points are required".into()));
    }
    let count = count.min(cloud.dim());
    let (mean, cov) = weighted_covariance(cloud);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    if top.is_nan() || top <= 0.0 {
        return Err(Error::DegenerateData("data has zero variance".into()));
    }
    let mut axes = Vec::with_capacity(count);
    let mut sdev = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        axis.iter_mut().for_each(|v| *v /= norm);
        canonical_sign(&mut axis);
        axes.push(axis);
        sdev.push(eig.eigenvalues[k].max(0.0).sqrt());
    }
    Ok(PrincipalAxes { mean, axes, sdev })
}

/// Weighted mean, leading unit direction and the standard deviation along it.
pub fn first_principal_component(cloud: &PointCloud) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut pa = principal_axes(cloud, 1)?;
    Ok((pa.mean, pa.axes.remove(0), pa.sdev[0]))
}

/// Two nodes at `mean ± sdev·axis`, joined by one edge.
pub fn init_default(cloud: &PointCloud, lambda: f64) -> Result<(ElasticGraph, NodeEmbedding)> {
    let (mean, axis, sdev) = first_principal_component(cloud)?;
    let a: Vec<f64> = mean.iter().zip(&axis).map(|(m, d)| m - sdev * d).collect();
    let b: Vec<f64> = mean.iter().zip(&axis).map(|(m, d)| m + sdev * d).collect();
    let graph = ElasticGraph::new(2, vec![[0, 1]], vec![lambda], vec![0.0, 0.0])?;
    Ok((graph, NodeEmbedding::from_rows(&[a, b])?))
}

/// Four nodes on a ring spanned by the two leading principal axes.
pub fn init_ring(cloud: &PointCloud, lambda: f64, mu: f64) -> Result<(ElasticGraph, NodeEmbedding)> {
    let pa = principal_axes(cloud, 2)?;
    let m = cloud.dim();
    let second = if pa.axes.len() > 1 { 1 } else { 0 };
    let corner =
        |k: usize, sign: f64| -> Vec<f64> { (0..m).map(|d| pa.mean[d] + sign * pa.sdev[k] * pa.axes[k][d]).collect() };
    let rows = vec![
        corner(0, 1.0),
        corner(second, 1.0),
        corner(0, -1.0),
        corner(second, -1.0),
    ];
    let graph = ElasticGraph::cycle(4, lambda, mu)?;
    Ok((graph, NodeEmbedding::from_rows(&rows)?))
}
