//! Post-fit geometry: projecting points onto edges, extending and pruning
//! leaves, decomposing a graph into branches and computing pseudotime.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, NodeEmbedding, PointCloud};
use crate::error::{Error, Result};
use crate::fit::partition_points;
use crate::graph::ElasticGraph;

/// Projection of one point onto its nearest edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointProjection {
    pub edge: usize,
    /// Position along the edge from its first to its second node, in `[0, 1]`.
    pub t: f64,
    pub sqdist: f64,
}

fn project_unchecked(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut dot = 0.0;
    let mut len2 = 0.0;
    for ((x, u), v) in p.iter().zip(a).zip(b) {
        let d = v - u;
        dot += (x - u) * d;
        len2 += d * d;
    }
    let t = if len2 > 0.0 { (dot / len2).clamp(0.0, 1.0) } else { 0.0 };
    let sqdist = p
        .iter()
        .zip(a)
        .zip(b)
        .map(|((x, u), v)| {
            let d = x - (u + t * (v - u));
            d * d
        })
        .sum();
    (t, sqdist)
}

/// Clamped parameter and squared distance of the projection of `point` onto segment `[a, b]`.
pub fn project_point_on_edge(point: &[f64], a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != point.len() || b.len() != point.len() {
        return Err(Error::DimensionMismatch {
            what: "segment endpoint dimension",
            expected: point.len(),
            found: if a.len() != point.len() { a.len() } else { b.len() },
        });
    }
    if a == b {
        return Err(Error::InvalidArgument(
            "degenerate edge with coincident endpoints".into(),
        ));
    }
    Ok(project_unchecked(point, a, b))
}

/// Nearest edge of every point, ties to the lowest edge index. Edges whose
/// endpoints coincide behave as a single point at `t = 0`.
pub fn project_dataset(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    cloud: &PointCloud,
) -> Result<Vec<PointProjection>> {
    if graph.edge_count() == 0 {
        return Err(Error::InvalidArgument("graph has no edges to project onto".into()));
    }
    if embedding.len() != graph.node_count() || embedding.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            what: "embedding shape",
            expected: graph.node_count(),
            found: embedding.len(),
        });
    }
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut best = PointProjection {
                edge: 0,
                t: 0.0,
                sqdist: f64::INFINITY,
            };
            for (e, &[a, b]) in graph.edges().iter().enumerate() {
                let (t, d) = project_unchecked(p, embedding.row(a), embedding.row(b));
                if d < best.sqdist {
                    best = PointProjection { edge: e, t, sqdist: d };
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMode {
    /// Place the new node at the centroid distance of the overhanging points.
    Centroid,
    /// Place it at the farthest overhanging point's projection.
    Max,
}

impl std::str::FromStr for ExtensionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(ExtensionMode::Centroid),
            "max" => Ok(ExtensionMode::Max),
            _ => Err(Error::InvalidArgument(format!("unknown extension mode '{s}'"))),
        }
    }
}

/// Adds a node beyond every leaf that has assigned points projecting past its end.
pub fn extend_leaves(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    cloud: &PointCloud,
    mode: ExtensionMode,
) -> Result<(ElasticGraph, NodeEmbedding)> {
    let proj = project_dataset(graph, embedding, cloud)?;
    let partition = partition_points(cloud, embedding, f64::INFINITY);
    let inc = graph.incidence();
    let mut edges = graph.edges().to_vec();
    let mut lambda = graph.lambda().to_vec();
    let mut mu = graph.mu().to_vec();
    let mut emb = embedding.clone();
    let dim = cloud.dim();
    for leaf in graph.leaves() {
        let e = inc[leaf][0];
        let leaf_t = if graph.edge(e)[0] == leaf { 0.0 } else { 1.0 };
        let origin = embedding.row(leaf);
        let overhang: Vec<usize> = partition
            .members(leaf)
            .filter(|&i| proj[i].edge == e && proj[i].t == leaf_t)
            .collect();
        if overhang.is_empty() {
            continue;
        }
        let mut centroid = vec![0.0; dim];
        let mut w = 0.0;
        for &i in &overhang {
            let wi = cloud.weight(i);
            for (c, v) in centroid.iter_mut().zip(cloud.point(i)) {
                *c += wi * v;
            }
            w += wi;
        }
        centroid.iter_mut().for_each(|c| *c /= w);
        let dist = sq_dist(&centroid, origin).sqrt();
        if dist.is_nan() || dist <= 0.0 {
            continue;
        }
        let dir: Vec<f64> = centroid.iter().zip(origin).map(|(c, o)| (c - o) / dist).collect();
        let reach = match mode {
            ExtensionMode::Centroid => dist,
            ExtensionMode::Max => overhang
                .iter()
                .map(|&i| {
                    cloud
                        .point(i)
                        .iter()
                        .zip(origin)
                        .zip(&dir)
                        .map(|((x, o), d)| (x - o) * d)
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let new = emb.len();
        let pos: Vec<f64> = origin.iter().zip(&dir).map(|(o, d)| o + reach * d).collect();
        emb.push_row(&pos);
        edges.push([leaf, new]);
        lambda.push(graph.lambda()[e]);
        mu.push(0.0);
    }
    let n = emb.len();
    Ok((ElasticGraph::from_parts(n, edges, lambda, mu)?, emb))
}

/// Removes edges onto which fewer than `min_points` points project, then the
/// nodes left without edges.
pub fn filter_branches(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    cloud: &PointCloud,
    min_points: usize,
) -> Result<(ElasticGraph, NodeEmbedding)> {
    if min_points == 0 {
        return Ok((graph.clone(), embedding.clone()));
    }
    let proj = project_dataset(graph, embedding, cloud)?;
    let mut counts = vec![0usize; graph.edge_count()];
    for p in &proj {
        counts[p.edge] += 1;
    }
    let keep: Vec<bool> = counts.iter().map(|&c| c >= min_points).collect();
    let mut new_deg = vec![0usize; graph.node_count()];
    for (&[a, b], &k) in graph.edges().iter().zip(&keep) {
        if k {
            new_deg[a] += 1;
            new_deg[b] += 1;
        }
    }
    let old_deg = graph.degrees();
    let mut map = vec![None; graph.node_count()];
    let mut next = 0;
    for v in 0..graph.node_count() {
        if new_deg[v] > 0 || old_deg[v] == 0 {
            map[v] = Some(next);
            next += 1;
        }
    }
    if !keep.iter().any(|&k| k) {
        return Err(Error::EmptyGraph);
    }
    let mut edges = Vec::new();
    let mut lambda = Vec::new();
    for ((&[a, b], &l), &k) in graph.edges().iter().zip(graph.lambda()).zip(&keep) {
        if k {
            edges.push([map[a].unwrap(), map[b].unwrap()]);
            lambda.push(l);
        }
    }
    let mu: Vec<f64> = (0..graph.node_count())
        .filter(|&v| map[v].is_some())
        .map(|v| if new_deg[v] >= 2 { graph.mu()[v] } else { 0.0 })
        .collect();
    Ok((
        ElasticGraph::from_parts(next, edges, lambda, mu)?,
        embedding.remap(&map),
    ))
}

/// A maximal chain of edges whose interior nodes have degree 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub nodes: Vec<usize>,
    /// Set when the branch closes on itself; the first node is then repeated at the end.
    pub cycle: bool,
}

impl Branch {
    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }
}

pub fn extract_branches(graph: &ElasticGraph) -> Vec<Branch> {
    let nbrs = graph.neighbors();
    let deg = graph.degrees();
    let mut used = vec![false; graph.edge_count()];
    let mut out = Vec::new();

    let walk = |start: usize, first: usize, used: &mut Vec<bool>| -> Branch {
        let mut nodes = vec![start];
        let mut cur = first;
        used[graph.find_edge(start, cur).unwrap()] = true;
        nodes.push(cur);
        while deg[cur] == 2 && cur != start {
            let next = nbrs[cur]
                .iter()
                .copied()
                .find(|&x| !used[graph.find_edge(cur, x).unwrap()]);
            let Some(next) = next else { break };
            used[graph.find_edge(cur, next).unwrap()] = true;
            cur = next;
            nodes.push(cur);
        }
        let cycle = nodes.len() > 2 && nodes[0] == *nodes.last().unwrap();
        Branch { nodes, cycle }
    };

    for v in 0..graph.node_count() {
        if deg[v] == 2 {
            continue;
        }
        for &u in &nbrs[v] {
            if !used[graph.find_edge(v, u).unwrap()] {
                out.push(walk(v, u, &mut used));
            }
        }
    }
    // what is left are components in which every node has degree 2
    for v in 0..graph.node_count() {
        for &u in &nbrs[v] {
            if !used[graph.find_edge(v, u).unwrap()] {
                out.push(walk(v, u, &mut used));
            }
        }
    }
    out
}

/// Node sequence of the fewest-edges path from `root` to `leaf`; among
/// equally short paths the lexicographically smallest.
pub fn shortest_path(graph: &ElasticGraph, root: usize, leaf: usize) -> Result<Vec<usize>> {
    let n = graph.node_count();
    if root >= n || leaf >= n {
        return Err(Error::InvalidArgument(format!(
            "node index out of range (root {root}, leaf {leaf}, {n} nodes)"
        )));
    }
    let nbrs = graph.neighbors();
    let mut dist = vec![usize::MAX; n];
    dist[leaf] = 0;
    let mut queue = VecDeque::from([leaf]);
    while let Some(v) = queue.pop_front() {
        for &u in &nbrs[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[root] == usize::MAX {
        return Err(Error::Disconnected { root, leaf });
    }
    let mut path = vec![root];
    let mut cur = root;
    while cur != leaf {
        cur = nbrs[cur]
            .iter()
            .copied()
            .find(|&u| dist[u] + 1 == dist[cur])
            .expect("distance labels are consistent");
        path.push(cur);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudotimeEntry {
    /// `None` for points whose nearest edge is not on the path.
    pub pseudotime: Option<f64>,
    pub on_path: bool,
    pub edge: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudotimeTable {
    pub path: Vec<usize>,
    /// Pseudotime of every node of the path, in path order.
    pub node_pseudotime: Vec<f64>,
    pub points: Vec<PseudotimeEntry>,
}

/// Pseudotime along the path from `root` to `leaf`. Interior nodes of degree
/// at least three split the path into segments of equal pseudotime length;
/// within a segment, pseudotime is proportional to arc length.
pub fn pseudotime(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    projections: &[PointProjection],
    root: usize,
    leaf: usize,
) -> Result<PseudotimeTable> {
    if root == leaf {
        return Err(Error::InvalidArgument("root and leaf must differ".into()));
    }
    let path = shortest_path(graph, root, leaf)?;
    let deg = graph.degrees();
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        let len = sq_dist(embedding.row(w[0]), embedding.row(w[1])).sqrt();
        cum.push(cum.last().unwrap() + len);
    }
    let mut bounds = vec![0];
    bounds.extend((1..path.len() - 1).filter(|&i| deg[path[i]] >= 3));
    bounds.push(path.len() - 1);
    let segments = (bounds.len() - 1) as f64;

    let at = |s: f64| -> f64 {
        // segment containing arc length s, preferring the earlier one on a boundary
        let k = (0..bounds.len() - 1)
            .find(|&k| s <= cum[bounds[k + 1]])
            .unwrap_or(bounds.len() - 2);
        let (s0, s1) = (cum[bounds[k]], cum[bounds[k + 1]]);
        let frac = if s1 > s0 {
            ((s - s0) / (s1 - s0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (k as f64 + frac) / segments
    };

    let mut node_pseudotime: Vec<f64> = cum.iter().map(|&s| at(s)).collect();
    for (k, &b) in bounds.iter().enumerate() {
        node_pseudotime[b] = k as f64 / segments;
    }

    let mut edge_pos = vec![None; graph.edge_count()];
    for (j, w) in path.windows(2).enumerate() {
        let e = graph.find_edge(w[0], w[1]).expect("path follows graph edges");
        edge_pos[e] = Some((j, graph.edge(e)[0] == w[0]));
    }
    let points = projections
        .iter()
        .map(|p| {
            let pseudotime = edge_pos[p.edge].map(|(j, forward)| {
                let along = if forward { p.t } else { 1.0 - p.t };
                if along == 0.0 {
                    node_pseudotime[j]
                } else if along == 1.0 {
                    node_pseudotime[j + 1]
                } else {
                    at(cum[j] + along * (cum[j + 1] - cum[j]))
                }
            });
            PseudotimeEntry {
                pseudotime,
                on_path: pseudotime.is_some(),
                edge: p.edge,
                t: p.t,
            }
        })
        .collect();
    Ok(PseudotimeTable {
        path,
        node_pseudotime,
        points,
    })
}
