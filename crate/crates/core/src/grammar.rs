//! Graph rewriting operations and candidate enumeration.
//!
//! Each operation edits the graph structure, the elastic moduli and the
//! embedding together, so that the result is a ready starting point for a
//! fit. Growing operations append the new node at the end; removing
//! operations compact node indices and report the old→new index map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{NodeEmbedding, PointCloud};
use crate::error::{Error, Result};
use crate::fit::Partition;
use crate::graph::ElasticGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    BisectEdge,
    AddNodeToNode,
    RemoveLeaf,
    ShrinkInternalEdge,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::BisectEdge => "bisect_edge",
            OpKind::AddNodeToNode => "add_node_to_node",
            OpKind::RemoveLeaf => "remove_leaf",
            OpKind::ShrinkInternalEdge => "shrink_internal_edge",
        }
    }
}

/// One operation of a grammar set, optionally restricted to nodes whose
/// degree lies in `[min, max]`. For edge operations both endpoints must
/// satisfy the restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarRule {
    pub kind: OpKind,
    pub degree_range: Option<(usize, usize)>,
}

impl GrammarRule {
    pub const fn new(kind: OpKind) -> Self {
        Self {
            kind,
            degree_range: None,
        }
    }

    pub const fn with_degrees(kind: OpKind, min: usize, max: usize) -> Self {
        Self {
            kind,
            degree_range: Some((min, max)),
        }
    }

    fn admits(&self, degree: usize) -> bool {
        self.degree_range.is_none_or(|(lo, hi)| degree >= lo && degree <= hi)
    }
}

/// Where an operation was applied, in the indices of the graph it was
/// applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Edge([usize; 2]),
    Node(usize),
}

/// Moduli given to elements the update rules do not otherwise determine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moduli {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub graph: ElasticGraph,
    pub embedding: NodeEmbedding,
    pub kind: OpKind,
    pub target: Target,
    /// Old node index → new node index (`None` for removed nodes).
    pub index_map: Vec<Option<usize>>,
}

fn identity_map(n: usize) -> Vec<Option<usize>> {
    (0..n).map(Some).collect()
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

pub fn bisect_edge(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    a: usize,
    b: usize,
    default_mu: f64,
) -> Result<Candidate> {
    let idx = graph
        .find_edge(a, b)
        .ok_or_else(|| Error::NotApplicable(format!("no edge {{{a},{b}}}")))?;
    let n = graph.node_count();
    let [a, b] = graph.edge(idx);
    let lam = graph.lambda()[idx];
    let mut edges = Vec::with_capacity(graph.edge_count() + 1);
    let mut lambda = Vec::with_capacity(graph.edge_count() + 1);
    for (i, (&e, &l)) in graph.edges().iter().zip(graph.lambda()).enumerate() {
        if i != idx {
            edges.push(e);
            lambda.push(l);
        }
    }
    edges.extend([[a, n], [n, b]]);
    lambda.extend([lam, lam]);
    let mut mu = graph.mu().to_vec();
    mu.push(default_mu);
    let mut emb = embedding.clone();
    emb.push_row(&midpoint(embedding.row(a), embedding.row(b)));
    Ok(Candidate {
        graph: ElasticGraph::from_parts(n + 1, edges, lambda, mu)?,
        embedding: emb,
        kind: OpKind::BisectEdge,
        target: Target::Edge([a, b]),
        index_map: identity_map(n),
    })
}

fn assigned_mean(cloud: &PointCloud, partition: &Partition, node: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; cloud.dim()];
    let mut w = 0.0;
    for i in partition.members(node) {
        let wi = cloud.weight(i);
        for (acc, v) in sum.iter_mut().zip(cloud.point(i)) {
            *acc += wi * v;
        }
        w += wi;
    }
    (w > 0.0).then(|| sum.into_iter().map(|v| v / w).collect())
}

/// Attaches a new leaf to `node`. Returns `Ok(None)` when the new position
/// is undefined: a non-leaf node with no assigned data points.
pub fn add_node_to_node(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    cloud: &PointCloud,
    partition: &Partition,
    node: usize,
    defaults: Moduli,
) -> Result<Option<Candidate>> {
    let n = graph.node_count();
    if node >= n {
        return Err(Error::NotApplicable(format!("no node {node}")));
    }
    let inc = &graph.incidence()[node];
    let mut mu = graph.mu().to_vec();
    let (lam, pos) = match inc.len() {
        1 => {
            let e = graph.edge(inc[0]);
            let nb = if e[0] == node { e[1] } else { e[0] };
            mu[node] = if graph.degree(nb) >= 2 {
                graph.mu()[nb]
            } else {
                defaults.mu
            };
            let pos: Vec<f64> = embedding
                .row(node)
                .iter()
                .zip(embedding.row(nb))
                .map(|(a, b)| 2.0 * a - b)
                .collect();
            (graph.lambda()[inc[0]], pos)
        }
        0 => match assigned_mean(cloud, partition, node) {
            Some(p) => (defaults.lambda, p),
            None => return Ok(None),
        },
        k => {
            let lam = inc.iter().map(|&e| graph.lambda()[e]).sum::<f64>() / k as f64;
            match assigned_mean(cloud, partition, node) {
                Some(p) => (lam, p),
                None => return Ok(None),
            }
        }
    };
    let mut edges = graph.edges().to_vec();
    let mut lambda = graph.lambda().to_vec();
    edges.push([node, n]);
    lambda.push(lam);
    mu.push(0.0);
    let mut emb = embedding.clone();
    emb.push_row(&pos);
    Ok(Some(Candidate {
        graph: ElasticGraph::from_parts(n + 1, edges, lambda, mu)?,
        embedding: emb,
        kind: OpKind::AddNodeToNode,
        target: Target::Node(node),
        index_map: identity_map(n),
    }))
}

fn removal_map(n: usize, removed: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|i| match i.cmp(&removed) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect()
}

/// Zeroes the bending modulus of every node that is no longer a star centre.
fn clear_non_center_mu(graph: &mut ElasticGraph) {
    let deg = graph.degrees();
    for (v, d) in deg.into_iter().enumerate() {
        if d < 2 {
            graph.mu_mut()[v] = 0.0;
        }
    }
}

pub fn remove_leaf(graph: &ElasticGraph, embedding: &NodeEmbedding, node: usize) -> Result<Candidate> {
    let n = graph.node_count();
    if node >= n || graph.degree(node) != 1 {
        return Err(Error::NotApplicable(format!("node {node} is not a leaf")));
    }
    let map = removal_map(n, node);
    let mut edges = Vec::with_capacity(graph.edge_count() - 1);
    let mut lambda = Vec::with_capacity(graph.edge_count() - 1);
    for (&[a, b], &l) in graph.edges().iter().zip(graph.lambda()) {
        if a == node || b == node {
            continue;
        }
        edges.push([map[a].unwrap(), map[b].unwrap()]);
        lambda.push(l);
    }
    let mu: Vec<f64> = (0..n).filter(|&v| v != node).map(|v| graph.mu()[v]).collect();
    let mut g = ElasticGraph::from_parts(n - 1, edges, lambda, mu)?;
    // a former 2-star centre becomes a leaf; larger stars keep their modulus
    clear_non_center_mu(&mut g);
    Ok(Candidate {
        graph: g,
        embedding: embedding.remap(&map),
        kind: OpKind::RemoveLeaf,
        target: Target::Node(node),
        index_map: map,
    })
}

/// Contracts the internal edge `{a, b}`. The endpoint with the larger index
/// is removed and its other edges are reattached to the surviving one.
/// Edges that become parallel are merged, keeping the larger modulus.
pub fn shrink_internal_edge(graph: &ElasticGraph, embedding: &NodeEmbedding, a: usize, b: usize) -> Result<Candidate> {
    if graph.find_edge(a, b).is_none() {
        return Err(Error::NotApplicable(format!("no edge {{{a},{b}}}")));
    }
    let (keep, gone) = (a.min(b), a.max(b));
    if graph.degree(keep) < 2 || graph.degree(gone) < 2 {
        return Err(Error::NotApplicable(format!("edge {{{a},{b}}} is not internal")));
    }
    let n = graph.node_count();
    let map = removal_map(n, gone);
    let mut merged: BTreeMap<[usize; 2], f64> = BTreeMap::new();
    for (&[x, y], &l) in graph.edges().iter().zip(graph.lambda()) {
        if [x, y] == [keep, gone] {
            continue;
        }
        let x = if x == gone { keep } else { x };
        let y = if y == gone { keep } else { y };
        let key = [map[x.min(y)].unwrap(), map[x.max(y)].unwrap()];
        merged.entry(key).and_modify(|v| *v = v.max(l)).or_insert(l);
    }
    let mut mu: Vec<f64> = (0..n).filter(|&v| v != gone).map(|v| graph.mu()[v]).collect();
    mu[keep] = 0.5 * (graph.mu()[keep] + graph.mu()[gone]);
    let (edges, lambda) = merged.into_iter().unzip();
    let mut g = ElasticGraph::from_parts(n - 1, edges, lambda, mu)?;
    clear_non_center_mu(&mut g);
    let mut emb = embedding.remap(&map);
    let mid = midpoint(embedding.row(keep), embedding.row(gone));
    emb.row_mut(keep).copy_from_slice(&mid);
    Ok(Candidate {
        graph: g,
        embedding: emb,
        kind: OpKind::ShrinkInternalEdge,
        target: Target::Edge([keep, gone]),
        index_map: map,
    })
}

/// Applies every rule of the grammar set to every admissible target.
/// Candidates are ordered by operation kind, then by target index.
pub fn enumerate_candidates(
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
    cloud: &PointCloud,
    partition: &Partition,
    grammar: &[GrammarRule],
    defaults: Moduli,
) -> Result<Vec<Candidate>> {
    let mut rules = grammar.to_vec();
    rules.sort_by_key(|r| r.kind);
    let deg = graph.degrees();
    let mut out = Vec::new();
    for rule in &rules {
        match rule.kind {
            OpKind::BisectEdge => {
                for &[a, b] in graph.edges() {
                    if rule.admits(deg[a]) && rule.admits(deg[b]) {
                        out.push(bisect_edge(graph, embedding, a, b, defaults.mu)?);
                    }
                }
            }
            OpKind::AddNodeToNode => {
                for (v, &d) in deg.iter().enumerate() {
                    if rule.admits(d) {
                        if let Some(c) = add_node_to_node(graph, embedding, cloud, partition, v, defaults)? {
                            out.push(c);
                        }
                    }
                }
            }
            OpKind::RemoveLeaf => {
                for (v, &d) in deg.iter().enumerate() {
                    if d == 1 && rule.admits(d) {
                        out.push(remove_leaf(graph, embedding, v)?);
                    }
                }
            }
            OpKind::ShrinkInternalEdge => {
                for &[a, b] in graph.edges() {
                    if deg[a] > 1 && deg[b] > 1 && rule.admits(deg[a]) && rule.admits(deg[b]) {
                        out.push(shrink_internal_edge(graph, embedding, a, b)?);
                    }
                }
            }
        }
    }
    Ok(out)
}
