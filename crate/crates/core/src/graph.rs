//! Elastic graphs, their elastic matrix and the spring Laplacian.
//!
//! An [`ElasticGraph`] is a simple undirected graph carrying one stretching
//! modulus per edge and one bending modulus per node. The graph is
//! *primitive*: every node of degree ≥ 2 is the centre of exactly one star
//! made of all of its neighbours, so the star set never has to be stored.
//!
//! Edges are kept in canonical form: each edge is `[a, b]` with `a < b` and
//! the edge list is sorted. Edge indices are positions in that list.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stretching modulus used when none is given.
pub const DEFAULT_LAMBDA: f64 = 0.01;
/// Bending modulus used when none is given.
pub const DEFAULT_MU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticGraph {
    node_count: usize,
    edges: Vec<[usize; 2]>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl ElasticGraph {
    /// Assembles a graph without structural validation. Endpoints are
    /// normalised and the edge list sorted; only length mismatches fail.
    pub fn from_parts(node_count: usize, edges: Vec<[usize; 2]>, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if lambda.len() != edges.len() {
            return Err(Error::DimensionMismatch {
                what: "stretching moduli",
                expected: edges.len(),
                found: lambda.len(),
            });
        }
        if mu.len() != node_count {
            return Err(Error::DimensionMismatch {
                what: "bending moduli",
                expected: node_count,
                found: mu.len(),
            });
        }
        let mut pairs: Vec<([usize; 2], f64)> = edges
            .into_iter()
            .map(|[a, b]| [a.min(b), a.max(b)])
            .zip(lambda)
            .collect();
        pairs.sort_by_key(|x| x.0);
        let (edges, lambda) = pairs.into_iter().unzip();
        Ok(Self {
            node_count,
            edges,
            lambda,
            mu,
        })
    }

    /// Assembles and validates a graph; any error-level violation fails.
    pub fn new(node_count: usize, edges: Vec<[usize; 2]>, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let g = Self::from_parts(node_count, edges, lambda, mu)?;
        g.validate().into_result()?;
        Ok(g)
    }

    /// Graph with one stretching modulus for every edge and one bending
    /// modulus for every star centre (leaves and isolated nodes get 0).
    pub fn with_uniform_moduli(node_count: usize, edges: Vec<[usize; 2]>, lambda: f64, mu: f64) -> Result<Self> {
        let lam = vec![lambda; edges.len()];
        let mut g = Self::from_parts(node_count, edges, lam, vec![0.0; node_count])?;
        let deg = g.degrees();
        for (v, d) in deg.into_iter().enumerate() {
            if d >= 2 {
                g.mu[v] = mu;
            }
        }
        g.validate().into_result()?;
        Ok(g)
    }

    pub fn path(nodes: usize, lambda: f64, mu: f64) -> Result<Self> {
        let edges = (1..nodes).map(|i| [i - 1, i]).collect();
        Self::with_uniform_moduli(nodes, edges, lambda, mu)
    }

    pub fn cycle(nodes: usize, lambda: f64, mu: f64) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidArgument(format!(
                "a simple cycle needs at least 3 nodes, got {nodes}"
            )));
        }
        let mut edges: Vec<[usize; 2]> = (1..nodes).map(|i| [i - 1, i]).collect();
        edges.push([0, nodes - 1]);
        Self::with_uniform_moduli(nodes, edges, lambda, mu)
    }

    /// A `k`-star: node 0 is the centre, nodes `1..=k` its leaves.
    pub fn star(k: usize, lambda: f64, mu: f64) -> Result<Self> {
        let edges = (1..=k).map(|i| [0, i]).collect();
        Self::with_uniform_moduli(k + 1, edges, lambda, mu)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> [usize; 2] {
        self.edges[i]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub(crate) fn mu_mut(&mut self) -> &mut [f64] {
        &mut self.mu
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search(&key).ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &[a, b] in &self.edges {
            if a < self.node_count {
                deg[a] += 1;
            }
            if b < self.node_count && b != a {
                deg[b] += 1;
            }
        }
        deg
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e[0] == v || e[1] == v).count()
    }

    /// Sorted neighbour lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &[a, b] in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    /// Incident edge indices per node, in ascending edge order.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.node_count];
        for (i, &[a, b]) in self.edges.iter().enumerate() {
            inc[a].push(i);
            inc[b].push(i);
        }
        inc
    }

    /// Connected component label per node (labels in order of first node).
    pub fn components(&self) -> Vec<usize> {
        let adj = self.neighbors();
        let mut label = vec![usize::MAX; self.node_count];
        let mut next = 0;
        for s in 0..self.node_count {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// True when the graph has no cycle (a forest).
    pub fn is_acyclic(&self) -> bool {
        self.edges.len() + self.component_count() == self.node_count
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.degrees()
            .into_iter()
            .enumerate()
            .filter(|&(_, d)| d == 1)
            .map(|(v, _)| v)
            .collect()
    }

    /// Nodes of degree ≥ 3.
    pub fn branch_nodes(&self) -> Vec<usize> {
        self.degrees()
            .into_iter()
            .enumerate()
            .filter(|&(_, d)| d >= 3)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_graph(self)
    }
}

/// A single structural finding of [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    SelfLoop {
        edge: usize,
        node: usize,
    },
    DuplicateEdge {
        a: usize,
        b: usize,
    },
    NodeOutOfRange {
        edge: usize,
        node: usize,
    },
    /// Negative or non-finite stretching modulus.
    NonPositiveStretching {
        edge: usize,
        value: f64,
    },
    /// λ = 0: allowed (k-means limit) but reported.
    ZeroStretching {
        edge: usize,
    },
    InvalidBending {
        node: usize,
        value: f64,
    },
    BendingAtNonCenter {
        node: usize,
        value: f64,
    },
    Disconnected {
        components: usize,
    },
}

impl Violation {
    /// Informational findings do not make a graph invalid.
    pub fn is_error(&self) -> bool {
        !matches!(self, Violation::ZeroStretching { .. } | Violation::Disconnected { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { edge, node } => write!(f, "self-loop at node {node} (edge {edge})"),
            Violation::DuplicateEdge { a, b } => write!(f, "duplicate edge {{{a},{b}}}"),
            Violation::NodeOutOfRange { edge, node } => {
                write!(f, "edge {edge} references missing node {node}")
            }
            Violation::NonPositiveStretching { edge, value } => {
                write!(f, "nonpositive stretching modulus {value} on edge {edge}")
            }
            Violation::ZeroStretching { edge } => write!(f, "zero stretching modulus on edge {edge}"),
            Violation::InvalidBending { node, value } => {
                write!(f, "invalid bending modulus {value} at node {node}")
            }
            Violation::BendingAtNonCenter { node, value } => {
                write!(f, "bending modulus at non-center node {node} ({value})")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph has {components} connected components")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_error())
    }

    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn into_result(self) -> Result<()> {
        let errors: Vec<_> = self.violations.into_iter().filter(Violation::is_error).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(errors))
        }
    }
}

/// Reports every violated structural invariant. Never fails.
pub fn validate_graph(graph: &ElasticGraph) -> ValidationReport {
    let n = graph.node_count;
    let mut violations = Vec::new();
    let mut deg = vec![0usize; n];
    let mut range_ok = true;
    for (i, &[a, b]) in graph.edges.iter().enumerate() {
        for v in [a, b] {
            if v >= n {
                violations.push(Violation::NodeOutOfRange { edge: i, node: v });
                range_ok = false;
            }
        }
        if a == b {
            violations.push(Violation::SelfLoop { edge: i, node: a });
        } else if a < n && b < n {
            deg[a] += 1;
            deg[b] += 1;
        }
        if i > 0 && graph.edges[i - 1] == [a, b] && a != b {
            violations.push(Violation::DuplicateEdge { a, b });
        }
    }
    for (i, &l) in graph.lambda.iter().enumerate() {
        if !l.is_finite() || l < 0.0 {
            violations.push(Violation::NonPositiveStretching { edge: i, value: l });
        } else if l == 0.0 {
            violations.push(Violation::ZeroStretching { edge: i });
        }
    }
    for (v, &m) in graph.mu.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            violations.push(Violation::InvalidBending { node: v, value: m });
        } else if m > 0.0 && deg[v] < 2 {
            violations.push(Violation::BendingAtNonCenter { node: v, value: m });
        }
    }
    if range_ok && n > 0 {
        let c = graph.component_count();
        if c > 1 {
            violations.push(Violation::Disconnected { components: c });
        }
    }
    ValidationReport { violations }
}

/// Symmetric `|V|×|V|` matrix: effective edge stretching moduli off the
/// diagonal, star bending moduli on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticMatrix(pub DMatrix<f64>);

/// Effective stretching modulus of every edge: `λ + α·(max(2, deg a, deg b) − 2)`.
pub fn effective_lambda(graph: &ElasticGraph, alpha: f64) -> Vec<f64> {
    let deg = graph.degrees();
    graph
        .edges
        .iter()
        .zip(&graph.lambda)
        .map(|(&[a, b], &l)| {
            let k = deg[a].max(deg[b]).max(2);
            l + alpha * (k - 2) as f64
        })
        .collect()
}

pub fn build_elastic_matrix(graph: &ElasticGraph, effective_alpha: f64) -> Result<ElasticMatrix> {
    if !(effective_alpha >= 0.0 && effective_alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and nonnegative, got {effective_alpha}"
        )));
    }
    graph.validate().into_result()?;
    let n = graph.node_count;
    let mut em = DMatrix::zeros(n, n);
    for (&[a, b], l) in graph.edges.iter().zip(effective_lambda(graph, effective_alpha)) {
        em[(a, b)] = l;
        em[(b, a)] = l;
    }
    for (v, &m) in graph.mu.iter().enumerate() {
        em[(v, v)] = m;
    }
    Ok(ElasticMatrix(em))
}

/// The three weighted adjacency matrices whose Laplacians sum to the
/// elastic operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringDecomposition {
    /// Edge springs with the α-folded stretching moduli.
    pub stretching: DMatrix<f64>,
    /// Centre-to-neighbour springs, `μ/k` per edge of each `k`-star.
    pub star_edges: DMatrix<f64>,
    /// Repulsive leaf-to-leaf springs, `−μ/k²` per leaf pair of each star.
    pub star_leaves: DMatrix<f64>,
}

fn check_consistency(em: &ElasticMatrix, graph: &ElasticGraph) -> Result<()> {
    let n = graph.node_count;
    let m = &em.0;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InconsistentMatrix(format!(
            "matrix is {}x{}, graph has {n} nodes",
            m.nrows(),
            m.ncols()
        )));
    }
    let deg = graph.degrees();
    for i in 0..n {
        if m[(i, i)] != 0.0 && deg[i] < 2 {
            return Err(Error::InconsistentMatrix(format!(
                "diagonal entry at node {i} of degree {}",
                deg[i]
            )));
        }
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::InconsistentMatrix(format!("asymmetric at ({i},{j})")));
            }
            if m[(i, j)] < 0.0 {
                return Err(Error::InconsistentMatrix(format!("negative entry at ({i},{j})")));
            }
            if m[(i, j)] != 0.0 && graph.find_edge(i, j).is_none() {
                return Err(Error::InconsistentMatrix(format!("entry at ({i},{j}) without an edge")));
            }
        }
    }
    Ok(())
}

pub fn decompose_elastic_matrix(em: &ElasticMatrix, graph: &ElasticGraph) -> Result<SpringDecomposition> {
    graph.validate().into_result()?;
    check_consistency(em, graph)?;
    let n = graph.node_count;
    let mut stretching = em.0.clone();
    stretching.fill_diagonal(0.0);
    let mut star_edges = DMatrix::zeros(n, n);
    let mut star_leaves = DMatrix::zeros(n, n);
    for (center, nbrs) in graph.neighbors().iter().enumerate() {
        let mu = em.0[(center, center)];
        let k = nbrs.len();
        if k < 2 || mu == 0.0 {
            continue;
        }
        let kf = k as f64;
        for &leaf in nbrs {
            star_edges[(center, leaf)] += mu / kf;
            star_edges[(leaf, center)] += mu / kf;
        }
        for (x, &p) in nbrs.iter().enumerate() {
            for &q in &nbrs[x + 1..] {
                star_leaves[(p, q)] -= mu / (kf * kf);
                star_leaves[(q, p)] -= mu / (kf * kf);
            }
        }
    }
    Ok(SpringDecomposition {
        stretching,
        star_edges,
        star_leaves,
    })
}

/// `L(A)_ij = δ_ij Σ_k A_kj − A_ij`.
pub fn adjacency_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = -a.clone();
    for j in 0..n {
        let s: f64 = a.column(j).sum();
        l[(j, j)] += s;
    }
    l
}

/// Sum of the three spring Laplacians. `2·L·Φ` is the gradient of the
/// elastic energy with respect to the node positions `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianOperator(pub DMatrix<f64>);

impl LaplacianOperator {
    /// Builds the operator straight from a graph and α.
    pub fn for_graph(graph: &ElasticGraph, alpha: f64) -> Result<Self> {
        let em = build_elastic_matrix(graph, alpha)?;
        graph_laplacian_sum(&em, graph)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    /// `tr(Φᵀ L Φ)`, equal to the elastic energy of the embedding.
    pub fn quadratic_form(&self, phi: &crate::data::NodeEmbedding) -> f64 {
        let n = self.size();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let l = self.0[(i, j)];
                if l != 0.0 {
                    let dot: f64 = phi.row(i).iter().zip(phi.row(j)).map(|(a, b)| a * b).sum();
                    total += l * dot;
                }
            }
        }
        total
    }
}

pub fn graph_laplacian_sum(em: &ElasticMatrix, graph: &ElasticGraph) -> Result<LaplacianOperator> {
    let d = decompose_elastic_matrix(em, graph)?;
    Ok(LaplacianOperator(
        adjacency_laplacian(&d.stretching) + adjacency_laplacian(&d.star_edges) + adjacency_laplacian(&d.star_leaves),
    ))
}
