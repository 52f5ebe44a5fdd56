//! Fitting a fixed graph structure to data.
//!
//! The fit alternates two steps until the embedding stops moving:
//! assign every point to its nearest node (or trim it when that node is
//! farther than `r0`), then solve the `|V|×|V|` linear system
//!
//! ```text
//! (diag(W_j / W) + L) Φ = B,   B_j = (1/W) Σ_{K(i)=j} w_i X_i
//! ```
//!
//! for all coordinate columns at once. The objective (trimmed error plus
//! elastic energy) never increases from one partition to the next.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, NodeEmbedding, PointCloud};
use crate::energy::{elastic_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::graph::{ElasticGraph, LaplacianOperator, DEFAULT_LAMBDA, DEFAULT_MU};

const PARTITION_CHUNK: usize = 2048;

/// Nearest-node assignment of every point, with trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assign: Vec<Option<usize>>,
    sqdist: Vec<f64>,
    counts: Vec<f64>,
    r0: f64,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    /// Assigned node of point `i`, `None` when trimmed.
    #[inline]
    pub fn node_of(&self, i: usize) -> Option<usize> {
        self.assign[i]
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assign
    }

    /// Squared distance of each point to its nearest node (trimmed or not).
    pub fn nearest_sqdist(&self) -> &[f64] {
        &self.sqdist
    }

    /// Total weight assigned to each node.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn trimmed_count(&self) -> usize {
        self.assign.iter().filter(|a| a.is_none()).count()
    }

    pub fn all_trimmed(&self) -> bool {
        self.assign.iter().all(Option::is_none)
    }

    /// Indices of the points assigned to `node`.
    pub fn members(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(node))
            .map(|(i, _)| i)
    }

    /// Trimmed error using the cached nearest distances.
    pub(crate) fn cached_mse(&self, cloud: &PointCloud) -> f64 {
        let r2 = self.r0 * self.r0;
        let acc: f64 = self
            .sqdist
            .iter()
            .zip(cloud.weights())
            .map(|(d, w)| w * d.min(r2))
            .sum();
        acc / cloud.total_weight()
    }
}

#[inline]
fn nearest_node(p: &[f64], embedding: &NodeEmbedding) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, row) in embedding.rows().enumerate() {
        let d = sq_dist(p, row);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

/// Assigns each point to its nearest node, ties to the lowest node index.
/// Points whose nearest node is not closer than `r0` are trimmed.
///
/// Panics if the embedding and the cloud have different dimensions or the
/// embedding has no rows.
pub fn partition_points(cloud: &PointCloud, embedding: &NodeEmbedding, r0: f64) -> Partition {
    assert_eq!(cloud.dim(), embedding.dim(), "data and embedding dimensions differ");
    assert!(!embedding.is_empty(), "cannot partition against an empty embedding");
    let r2 = r0 * r0;
    let nearest: Vec<(usize, f64)> = cloud
        .as_slice()
        .par_chunks(cloud.dim() * PARTITION_CHUNK)
        .flat_map_iter(|block| {
            block
                .chunks_exact(cloud.dim())
                .map(|p| nearest_node(p, embedding))
                .collect::<Vec<_>>()
        })
        .collect();

    let mut counts = vec![0.0; embedding.len()];
    let mut assign = Vec::with_capacity(cloud.len());
    let mut sqdist = Vec::with_capacity(cloud.len());
    for (i, (j, d)) in nearest.into_iter().enumerate() {
        if d < r2 {
            counts[j] += cloud.weight(i);
            assign.push(Some(j));
        } else {
            assign.push(None);
        }
        sqdist.push(d);
    }
    Partition {
        assign,
        sqdist,
        counts,
        r0,
    }
}

fn coupling_components(l: &DMatrix<f64>) -> Vec<usize> {
    let n = l.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if u != v && l[(v, u)] != 0.0 && label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Solves for the embedding minimising the quadratic objective of one
/// partition. Trimmed points enter neither side of the system.
pub fn solve_embedding(
    laplacian: &LaplacianOperator,
    partition: &Partition,
    cloud: &PointCloud,
) -> Result<NodeEmbedding> {
    let nodes = laplacian.size();
    if partition.counts.len() != nodes {
        return Err(Error::DimensionMismatch {
            what: "partition nodes vs operator size",
            expected: nodes,
            found: partition.counts.len(),
        });
    }
    if partition.all_trimmed() {
        return Err(Error::AllPointsTrimmed);
    }
    let comps = coupling_components(&laplacian.0);
    let ncomp = comps.iter().copied().max().map_or(0, |m| m + 1);
    let mut comp_weight = vec![0.0; ncomp];
    for (v, &c) in comps.iter().enumerate() {
        comp_weight[c] += partition.counts[v];
    }
    let unsupported: Vec<usize> = (0..nodes).filter(|&v| comp_weight[comps[v]] == 0.0).collect();
    if !unsupported.is_empty() {
        return Err(Error::SingularSystem { nodes: unsupported });
    }

    let m = cloud.dim();
    let total_w = cloud.total_weight();
    let mut a = laplacian.0.clone();
    for j in 0..nodes {
        a[(j, j)] += partition.counts[j] / total_w;
    }
    let mut rhs = DMatrix::<f64>::zeros(nodes, m);
    for (i, p) in cloud.points().enumerate() {
        if let Some(j) = partition.assign[i] {
            let w = cloud.weight(i);
            for (k, v) in p.iter().enumerate() {
                rhs[(j, k)] += w * v;
            }
        }
    }
    rhs /= total_w;

    let solution = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => a.lu().solve(&rhs).ok_or_else(|| Error::SingularSystem {
            nodes: (0..nodes).filter(|&v| partition.counts[v] == 0.0).collect(),
        })?,
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem {
            nodes: (0..nodes).filter(|&v| partition.counts[v] == 0.0).collect(),
        });
    }
    let mut out = NodeEmbedding::zeros(nodes, m);
    for j in 0..nodes {
        for k in 0..m {
            out.row_mut(j)[k] = solution[(j, k)];
        }
    }
    Ok(out)
}

/// Convergence and model parameters of a fit.
///
/// `epsilon`/`max_iter` govern a final (refinement) fit; the `search_*`
/// pair is the coarse budget given to every candidate during structure
/// search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Threshold on the largest node displacement, relative to the data
    /// bounding-box diagonal.
    pub epsilon: f64,
    pub max_iter: usize,
    pub search_epsilon: f64,
    pub search_max_iter: usize,
    /// Trimming radius, `f64::INFINITY` for none.
    pub r0: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iter: 100,
            search_epsilon: 1e-2,
            search_max_iter: 10,
            r0: f64::INFINITY,
            alpha: 0.0,
            lambda: DEFAULT_LAMBDA,
            mu: DEFAULT_MU,
        }
    }
}

impl FitConfig {
    /// The candidate-fitting variant of this configuration.
    pub fn coarse(&self) -> Self {
        Self {
            epsilon: self.search_epsilon,
            max_iter: self.search_max_iter,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if [self.epsilon, self.search_epsilon]
            .iter()
            .any(|e| e.is_nan() || *e <= 0.0)
        {
            return bad("epsilon must be positive".into());
        }
        if self.max_iter == 0 || self.search_max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.r0.is_nan() || self.r0 <= 0.0 {
            return bad(format!("trimming radius must be positive or infinite, got {}", self.r0));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and nonnegative, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("elastic moduli must be finite and nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub embedding: NodeEmbedding,
    pub partition: Partition,
    pub energy: EnergyBreakdown,
    /// Number of linear solves performed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every partition, the final state last.
    pub trace: Vec<EnergyBreakdown>,
}

fn energy_of(
    cloud: &PointCloud,
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    partition: &Partition,
    alpha: f64,
) -> Result<EnergyBreakdown> {
    let (u_e, u_r) = elastic_energy(graph, embedding, alpha)?;
    Ok(EnergyBreakdown::new(
        partition.cached_mse(cloud),
        partition.trimmed_count(),
        u_e,
        u_r,
    ))
}

/// Fits a fixed graph structure to the data starting from `init`.
pub fn fit_embedding(
    cloud: &PointCloud,
    graph: &ElasticGraph,
    init: &NodeEmbedding,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    if init.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            what: "initial embedding rows vs graph nodes",
            expected: graph.node_count(),
            found: init.len(),
        });
    }
    if init.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial embedding dimension vs data dimension",
            expected: cloud.dim(),
            found: init.dim(),
        });
    }
    let laplacian = LaplacianOperator::for_graph(graph, config.alpha)?;
    let tolerance = config.epsilon * cloud.diameter();

    let mut phi = init.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let partition = partition_points(cloud, &phi, config.r0);
        if partition.all_trimmed() {
            return Err(Error::AllPointsTrimmed);
        }
        trace.push(energy_of(cloud, graph, &phi, &partition, config.alpha)?);
        let next = solve_embedding(&laplacian, &partition, cloud)?;
        let moved = next.max_displacement(&phi);
        phi = next;
        iterations += 1;
        if moved <= tolerance {
            converged = true;
            break;
        }
    }
    let partition = partition_points(cloud, &phi, config.r0);
    if partition.all_trimmed() {
        return Err(Error::AllPointsTrimmed);
    }
    let energy = energy_of(cloud, graph, &phi, &partition, config.alpha)?;
    trace.push(energy);
    Ok(FitResult {
        embedding: phi,
        partition,
        energy,
        iterations,
        converged,
        trace,
    })
}
