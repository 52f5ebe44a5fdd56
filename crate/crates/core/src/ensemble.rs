//! Ensembles of graphs fitted to random subsamples, and the consensus graph
//! obtained by clustering their pooled nodes.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{pseudotime, PointProjection};
use crate::data::{sq_dist, NodeEmbedding, PointCloud};
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::graph::ElasticGraph;
use crate::robust::{estimate_trimming_radius, quantile_sorted};
use crate::strategy::{grow_graph, Strategy};

pub const DEFAULT_REPLICAS: usize = 100;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub graph: ElasticGraph,
    pub embedding: NodeEmbedding,
    pub energy: EnergyBreakdown,
    /// Sorted indices of the points the member was fitted on.
    pub sample: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEnsemble {
    pub members: Vec<EnsembleMember>,
    pub sample_fraction: f64,
    pub seed: u64,
}

impl GraphEnsemble {
    pub fn replicas(&self) -> usize {
        self.members.len()
    }
}

/// Fits `k` graphs, each on its own uniform sample of `⌈p·n⌉` points drawn
/// without replacement.
pub fn bootstrap_ensemble(
    cloud: &PointCloud,
    strategy: &Strategy,
    config: &FitConfig,
    k: usize,
    p: f64,
    seed: u64,
) -> Result<GraphEnsemble> {
    if k == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one replica".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction must lie in (0, 1], got {p}"
        )));
    }
    let n = cloud.len();
    let size = ((p * n as f64).ceil() as usize).min(n);
    if size < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample of {size} points is too small to seed a graph"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            let mut idx = if size == n {
                (0..n).collect()
            } else {
                sample(&mut rng, n, size).into_vec()
            };
            idx.sort_unstable();
            idx
        })
        .collect();
    let members = samples
        .into_par_iter()
        .map(|idx| {
            let sub = cloud.subset(&idx)?;
            let fit = grow_graph(&sub, strategy, config)?;
            Ok(EnsembleMember {
                graph: fit.graph,
                embedding: fit.embedding,
                energy: fit.energy,
                sample: idx,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphEnsemble {
        members,
        sample_fraction: p,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, q) in centroids.iter().enumerate() {
        let d = sq_dist(p, q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_once(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_centroid(p, &centroids);
            dist[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .unwrap();
                centroids[c] = points[far].clone();
                dist[far] = 0.0;
                labels[far] = c;
                changed = true;
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest_centroid(p, &centroids).0;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum();
    KMeansResult {
        centroids,
        labels,
        inertia,
    }
}

/// Lloyd's k-means with k-means++ seeding; the best of several restarts by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, config: &KMeansConfig) -> Result<KMeansResult> {
    if k == 0 || points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts.max(1) {
        let r = kmeans_once(points, k, config.max_iter.max(1), &mut rng);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

/// Node positions and edges of all ensemble members, flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePool {
    pub positions: Vec<Vec<f64>>,
    /// Pool index of the first node of every member.
    pub offsets: Vec<usize>,
    /// Member edges in pool indices.
    pub edges: Vec<[usize; 2]>,
}

impl NodePool {
    fn from_ensemble(ensemble: &GraphEnsemble) -> Self {
        let mut positions = Vec::new();
        let mut offsets = Vec::new();
        let mut edges = Vec::new();
        for m in &ensemble.members {
            let base = positions.len();
            offsets.push(base);
            positions.extend(m.embedding.to_rows());
            edges.extend(m.graph.edges().iter().map(|&[a, b]| [base + a, base + b]));
        }
        Self {
            positions,
            offsets,
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusGraph {
    pub positions: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    /// Number of member edges joining the two clusters of each edge.
    pub weights: Vec<usize>,
    /// Consensus node of every pooled member node; `None` if filtered out.
    pub node_map: Vec<Option<usize>>,
    pub pool: NodePool,
    pub clusters: usize,
    pub edge_threshold: usize,
    pub kmeans: KMeansConfig,
}

impl ConsensusGraph {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// The consensus as an elastic graph with uniform moduli.
    pub fn to_graph(&self, lambda: f64, mu: f64) -> Result<(ElasticGraph, NodeEmbedding)> {
        let g = ElasticGraph::with_uniform_moduli(self.node_count(), self.edges.clone(), lambda, mu)?;
        Ok((g, NodeEmbedding::from_rows(&self.positions)?))
    }
}

fn build_consensus(
    pool: NodePool,
    kept: &[bool],
    clusters: usize,
    edge_threshold: usize,
    kmeans_cfg: KMeansConfig,
) -> Result<ConsensusGraph> {
    let idx: Vec<usize> = (0..pool.positions.len()).filter(|&i| kept[i]).collect();
    if idx.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let pts: Vec<Vec<f64>> = idx.iter().map(|&i| pool.positions[i].clone()).collect();
    let km = kmeans(&pts, clusters.min(pts.len()), &kmeans_cfg)?;
    let mut node_map = vec![None; pool.positions.len()];
    for (&i, &c) in idx.iter().zip(&km.labels) {
        node_map[i] = Some(c);
    }
    let mut counts: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    for &[a, b] in &pool.edges {
        if let (Some(ca), Some(cb)) = (node_map[a], node_map[b]) {
            if ca != cb {
                *counts.entry([ca.min(cb), ca.max(cb)]).or_insert(0) += 1;
            }
        }
    }
    let (edges, weights) = counts.into_iter().filter(|&(_, c)| c > edge_threshold).unzip();
    Ok(ConsensusGraph {
        positions: km.centroids,
        edges,
        weights,
        node_map,
        pool,
        clusters,
        edge_threshold,
        kmeans: kmeans_cfg,
    })
}

/// Clusters all member nodes into `clusters` groups; consensus edges join
/// clusters linked by more than `edge_threshold` member edges.
pub fn consensus_graph(
    ensemble: &GraphEnsemble,
    clusters: usize,
    edge_threshold: usize,
    kmeans_cfg: KMeansConfig,
) -> Result<ConsensusGraph> {
    if ensemble.members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if clusters < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 clusters, got {clusters}"
        )));
    }
    let pool = NodePool::from_ensemble(ensemble);
    if pool.positions.len() < clusters {
        return Err(Error::InvalidArgument(format!(
            "{} pooled nodes cannot form {clusters} clusters",
            pool.positions.len()
        )));
    }
    let kept = vec![true; pool.positions.len()];
    build_consensus(pool, &kept, clusters, edge_threshold, kmeans_cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsensusFilters {
    /// Drop pooled nodes with fewer pooled neighbours than this within `density_radius`.
    pub min_node_local_density: Option<f64>,
    /// Defaults to the 0.1 quantile of pooled pairwise distances.
    pub density_radius: Option<f64>,
    pub edge_len_min: Option<f64>,
    pub edge_len_max: Option<f64>,
    pub drop_unconnected: bool,
}

impl ConsensusFilters {
    /// All filters enabled with the default density threshold for `k` replicas.
    pub fn defaults_for(replicas: usize) -> Self {
        Self {
            min_node_local_density: Some(0.05 * replicas as f64),
            density_radius: None,
            edge_len_min: None,
            edge_len_max: None,
            drop_unconnected: true,
        }
    }
}

/// Applies, in order: the density filter on pooled nodes (followed by
/// reclustering), the edge-length band, and removal of unconnected nodes.
pub fn filter_consensus(consensus: &ConsensusGraph, filters: &ConsensusFilters) -> Result<ConsensusGraph> {
    let mut out = match filters.min_node_local_density {
        Some(min_density) => {
            let pool = &consensus.pool;
            let radius = match filters.density_radius {
                Some(r) => r,
                None => {
                    let cloud = PointCloud::from_rows(&pool.positions)?;
                    estimate_trimming_radius(&cloud, 1000, 0.1, consensus.kmeans.seed)?
                }
            };
            let r2 = radius * radius;
            let kept: Vec<bool> = pool
                .positions
                .iter()
                .map(|p| {
                    let near = pool.positions.iter().filter(|q| sq_dist(p, q) <= r2).count() - 1;
                    near as f64 >= min_density
                })
                .collect();
            build_consensus(
                pool.clone(),
                &kept,
                consensus.clusters,
                consensus.edge_threshold,
                consensus.kmeans,
            )?
        }
        None => consensus.clone(),
    };

    if filters.edge_len_min.is_some() || filters.edge_len_max.is_some() {
        let lo = filters.edge_len_min.unwrap_or(0.0);
        let hi = filters.edge_len_max.unwrap_or(f64::INFINITY);
        let (edges, weights): (Vec<_>, Vec<_>) = out
            .edges
            .iter()
            .zip(&out.weights)
            .filter(|(&[a, b], _)| {
                let len = sq_dist(&out.positions[a], &out.positions[b]).sqrt();
                len >= lo && len <= hi
            })
            .map(|(&e, &w)| (e, w))
            .unzip();
        out.edges = edges;
        out.weights = weights;
    }

    if filters.drop_unconnected {
        let mut linked = vec![false; out.positions.len()];
        for &[a, b] in &out.edges {
            linked[a] = true;
            linked[b] = true;
        }
        let mut map = vec![None; linked.len()];
        let mut next = 0;
        for (v, &l) in linked.iter().enumerate() {
            if l {
                map[v] = Some(next);
                next += 1;
            }
        }
        if next == 0 {
            return Err(Error::EmptyGraph);
        }
        out.positions = (0..linked.len())
            .filter(|&v| linked[v])
            .map(|v| out.positions[v].clone())
            .collect();
        out.edges = out
            .edges
            .iter()
            .map(|&[a, b]| [map[a].unwrap(), map[b].unwrap()])
            .collect();
        out.node_map = out.node_map.iter().map(|c| c.and_then(|c| map[c])).collect();
    }
    if out.positions.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(out)
}

/// Interval between the 2.5% and 97.5% quantiles of the pseudotime of the
/// members' branching points, each matched to `branch_node` by proximity and
/// projected onto the reference path from `root` to `leaf`.
pub fn branch_point_interval(
    ensemble: &GraphEnsemble,
    reference: &ElasticGraph,
    embedding: &NodeEmbedding,
    root: usize,
    leaf: usize,
    branch_node: usize,
) -> Result<(f64, f64)> {
    if branch_node >= reference.node_count() {
        return Err(Error::InvalidArgument(format!(
            "no node {branch_node} in the reference graph"
        )));
    }
    let path = crate::analysis::shortest_path(reference, root, leaf)?;
    let path_edges: Vec<usize> = path
        .windows(2)
        .map(|w| reference.find_edge(w[0], w[1]).unwrap())
        .collect();
    let target = embedding.row(branch_node);
    let mut projections = Vec::new();
    for m in &ensemble.members {
        let nearest = m
            .graph
            .branch_nodes()
            .into_iter()
            .map(|v| (v, sq_dist(m.embedding.row(v), target)))
            .fold(None, |best: Option<(usize, f64)>, (v, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((v, d)),
            });
        let Some((v, _)) = nearest else { continue };
        let p = m.embedding.row(v);
        let mut best = PointProjection {
            edge: path_edges[0],
            t: 0.0,
            sqdist: f64::INFINITY,
        };
        for &e in &path_edges {
            let [a, b] = reference.edge(e);
            let (t, d) = project_on_segment(p, embedding.row(a), embedding.row(b));
            if d < best.sqdist {
                best = PointProjection { edge: e, t, sqdist: d };
            }
        }
        projections.push(best);
    }
    if projections.is_empty() {
        return Err(Error::NoBranch);
    }
    let table = pseudotime(reference, embedding, &projections, root, leaf)?;
    let mut values: Vec<f64> = table.points.iter().filter_map(|e| e.pseudotime).collect();
    values.sort_unstable_by(f64::total_cmp);
    Ok((quantile_sorted(&values, 0.025), quantile_sorted(&values, 0.975)))
}

fn project_on_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    crate::analysis::project_point_on_edge(p, a, b).unwrap_or_else(|_| (0.0, sq_dist(p, a)))
}
