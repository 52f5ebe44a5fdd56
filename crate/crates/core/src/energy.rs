//! Elastic energy of an embedding and the trimmed data-fitting objective.

use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, NodeEmbedding, PointCloud};
use crate::error::{Error, Result};
use crate::fit::Partition;
use crate::graph::{effective_lambda, ElasticGraph};

/// The terms of the fitting objective for one embedding and partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub mse: f64,
    pub u_e: f64,
    pub u_r: f64,
    pub total: f64,
    pub trimmed_count: usize,
}

impl EnergyBreakdown {
    pub fn new(mse: f64, trimmed_count: usize, u_e: f64, u_r: f64) -> Self {
        Self {
            mse,
            u_e,
            u_r,
            total: mse + u_e + u_r,
            trimmed_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub alpha: f64,
    /// Trimming radius; `f64::INFINITY` disables trimming.
    pub r0: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            r0: f64::INFINITY,
        }
    }
}

fn check_embedding(graph: &ElasticGraph, embedding: &NodeEmbedding) -> Result<()> {
    if embedding.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            what: "embedding rows vs graph nodes",
            expected: graph.node_count(),
            found: embedding.len(),
        });
    }
    if embedding.dim() == 0 && graph.node_count() > 0 {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: 1,
            found: 0,
        });
    }
    Ok(())
}

/// Stretching (`u_e`, α penalty included) and harmonicity (`u_r`) terms.
pub fn elastic_energy(graph: &ElasticGraph, embedding: &NodeEmbedding, alpha: f64) -> Result<(f64, f64)> {
    check_embedding(graph, embedding)?;
    let u_e = graph
        .edges()
        .iter()
        .zip(effective_lambda(graph, alpha))
        .map(|(&[a, b], l)| l * sq_dist(embedding.row(a), embedding.row(b)))
        .sum();

    let dim = embedding.dim();
    let mut mean = vec![0.0; dim];
    let mut u_r = 0.0;
    for (center, nbrs) in graph.neighbors().iter().enumerate() {
        let mu = graph.mu()[center];
        if nbrs.len() < 2 || mu == 0.0 {
            continue;
        }
        mean.iter_mut().for_each(|v| *v = 0.0);
        for &leaf in nbrs {
            for (acc, v) in mean.iter_mut().zip(embedding.row(leaf)) {
                *acc += v;
            }
        }
        let k = nbrs.len() as f64;
        mean.iter_mut().for_each(|v| *v /= k);
        u_r += mu * sq_dist(embedding.row(center), &mean);
    }
    Ok((u_e, u_r))
}

/// Weight-normalised trimmed approximation error. Trimmed points cost `r0²`.
pub fn approximation_error(
    cloud: &PointCloud,
    embedding: &NodeEmbedding,
    partition: &Partition,
    r0: f64,
) -> Result<(f64, usize)> {
    if partition.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            what: "partition length vs points",
            expected: cloud.len(),
            found: partition.len(),
        });
    }
    if embedding.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension vs data dimension",
            expected: cloud.dim(),
            found: embedding.dim(),
        });
    }
    let total_w = cloud.total_weight();
    if total_w <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let r2 = r0 * r0;
    let mut acc = 0.0;
    let mut trimmed = 0;
    for i in 0..cloud.len() {
        let w = cloud.weight(i);
        match partition.node_of(i) {
            Some(j) => acc += w * sq_dist(cloud.point(i), embedding.row(j)).min(r2),
            None => {
                trimmed += 1;
                acc += w * r2;
            }
        }
    }
    Ok((acc / total_w, trimmed))
}

pub fn total_energy(
    cloud: &PointCloud,
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    partition: &Partition,
    params: EnergyParams,
) -> Result<EnergyBreakdown> {
    let (mse, trimmed) = approximation_error(cloud, embedding, partition, params.r0)?;
    let (u_e, u_r) = elastic_energy(graph, embedding, params.alpha)?;
    Ok(EnergyBreakdown::new(mse, trimmed, u_e, u_r))
}
