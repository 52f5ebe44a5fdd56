//! Versioned JSON documents for fitted graphs, ensembles, consensus graphs,
//! forests and travel-maze curves.
//!
//! Floats are written in shortest round-trip form and parsed back exactly.
//! Infinite values (no trimming, failed candidates) are stored as `null`.

use std::path::Path;

use principal_graph::ensemble::{ConsensusGraph, EnsembleMember, GraphEnsemble, KMeansConfig, NodePool};
use principal_graph::grammar::Target;
use principal_graph::robust::{ForestResult, MazeResult};
use principal_graph::strategy::{PhaseRecord, PrincipalGraphResult};
use principal_graph::{ElasticGraph, EnergyBreakdown, NodeEmbedding, OpKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBlock {
    pub mse: f64,
    pub u_e: f64,
    pub u_r: f64,
    pub total: f64,
    pub trimmed_count: usize,
}

impl From<&EnergyBreakdown> for EnergyBlock {
    fn from(e: &EnergyBreakdown) -> Self {
        Self {
            mse: e.mse,
            u_e: e.u_e,
            u_r: e.u_r,
            total: e.total,
            trimmed_count: e.trimmed_count,
        }
    }
}

impl EnergyBlock {
    pub fn breakdown(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            mse: self.mse,
            u_e: self.u_e,
            u_r: self.u_r,
            total: self.total,
            trimmed_count: self.trimmed_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBlock {
    pub phase: usize,
    pub op: OpKind,
    pub target: Target,
    pub energy: Option<f64>,
    pub candidate_energies: Vec<Option<f64>>,
    pub accepted: usize,
    pub energy_after: Option<f64>,
    pub nodes: usize,
}

impl From<&PhaseRecord> for PhaseBlock {
    fn from(r: &PhaseRecord) -> Self {
        Self {
            phase: r.phase,
            op: r.kind,
            target: r.target,
            energy: finite(r.energy),
            candidate_energies: r.candidate_energies.iter().map(|&e| finite(e)).collect(),
            accepted: r.accepted,
            energy_after: finite(r.energy_after),
            nodes: r.node_count,
        }
    }
}

/// One embedded graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphBlock {
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub alpha: f64,
    /// Trimming radius; `null` when points are never trimmed.
    pub r0: Option<f64>,
    pub energy: Option<EnergyBlock>,
    pub history: Vec<PhaseBlock>,
}

impl GraphBlock {
    pub fn new(graph: &ElasticGraph, embedding: &NodeEmbedding, alpha: f64, r0: f64) -> Self {
        Self {
            nodes: embedding.to_rows(),
            edges: graph.edges().to_vec(),
            lambda: graph.lambda().to_vec(),
            mu: graph.mu().to_vec(),
            alpha,
            r0: finite(r0),
            energy: None,
            history: Vec::new(),
        }
    }

    pub fn from_result(res: &PrincipalGraphResult) -> Self {
        Self {
            energy: Some((&res.energy).into()),
            history: res.history.iter().map(PhaseBlock::from).collect(),
            ..Self::new(&res.graph, &res.embedding, res.alpha, res.r0)
        }
    }

    pub fn graph(&self) -> CliResult<(ElasticGraph, NodeEmbedding)> {
        let bad = |e: principal_graph::Error| CliError::data("load", format!("stored graph is invalid: {e}"));
        let graph = ElasticGraph::new(
            self.nodes.len(),
            self.edges.clone(),
            self.lambda.clone(),
            self.mu.clone(),
        )
        .map_err(bad)?;
        let emb = if self.nodes.is_empty() {
            NodeEmbedding::zeros(0, 0)
        } else {
            NodeEmbedding::from_rows(&self.nodes).map_err(bad)?
        };
        Ok((graph, emb))
    }

    pub fn r0(&self) -> f64 {
        self.r0.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberManifest {
    pub sample_size: usize,
    /// SHA-256 of the sorted sample indices as little-endian u64 values.
    pub sample_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingManifest {
    pub seed: u64,
    pub sample_fraction: f64,
    pub replicas: usize,
    pub members: Vec<MemberManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberBlock {
    pub graph: GraphBlock,
    pub sample: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDoc {
    pub manifest: SamplingManifest,
    pub members: Vec<MemberBlock>,
}

pub fn sample_hash(sample: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in sample {
        h.update((i as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl EnsembleDoc {
    pub fn new(ens: &GraphEnsemble, alpha: f64, r0: f64) -> Self {
        let members = ens
            .members
            .iter()
            .map(|m| MemberBlock {
                graph: GraphBlock {
                    energy: Some((&m.energy).into()),
                    ..GraphBlock::new(&m.graph, &m.embedding, alpha, r0)
                },
                sample: m.sample.clone(),
            })
            .collect();
        Self {
            manifest: SamplingManifest {
                seed: ens.seed,
                sample_fraction: ens.sample_fraction,
                replicas: ens.replicas(),
                members: ens
                    .members
                    .iter()
                    .map(|m| MemberManifest {
                        sample_size: m.sample.len(),
                        sample_sha256: sample_hash(&m.sample),
                    })
                    .collect(),
            },
            members,
        }
    }

    pub fn ensemble(&self) -> CliResult<GraphEnsemble> {
        let members = self
            .members
            .iter()
            .map(|m| {
                let (graph, embedding) = m.graph.graph()?;
                let energy = m
                    .graph
                    .energy
                    .as_ref()
                    .map_or(EnergyBreakdown::new(0.0, 0, 0.0, 0.0), EnergyBlock::breakdown);
                Ok(EnsembleMember {
                    graph,
                    embedding,
                    energy,
                    sample: m.sample.clone(),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(GraphEnsemble {
            members,
            sample_fraction: self.manifest.sample_fraction,
            seed: self.manifest.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusDoc {
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<usize>,
    /// Consensus node of every pooled member node, `null` when filtered out.
    pub cluster_map: Vec<Option<usize>>,
    pub clusters: usize,
    pub edge_threshold: usize,
    pub kmeans: KMeansConfig,
    pub pool: NodePool,
}

impl From<&ConsensusGraph> for ConsensusDoc {
    fn from(c: &ConsensusGraph) -> Self {
        Self {
            nodes: c.positions.clone(),
            edges: c.edges.clone(),
            weights: c.weights.clone(),
            cluster_map: c.node_map.clone(),
            clusters: c.clusters,
            edge_threshold: c.edge_threshold,
            kmeans: c.kmeans,
            pool: c.pool.clone(),
        }
    }
}

impl ConsensusDoc {
    pub fn consensus(&self) -> ConsensusGraph {
        ConsensusGraph {
            positions: self.nodes.clone(),
            edges: self.edges.clone(),
            weights: self.weights.clone(),
            node_map: self.cluster_map.clone(),
            pool: self.pool.clone(),
            clusters: self.clusters,
            edge_threshold: self.edge_threshold,
            kmeans: self.kmeans,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDoc {
    pub graphs: Vec<GraphBlock>,
    pub labels: Vec<Option<usize>>,
}

impl From<&ForestResult> for ForestDoc {
    fn from(f: &ForestResult) -> Self {
        Self {
            graphs: f.graphs.iter().map(GraphBlock::from_result).collect(),
            labels: f.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeDoc {
    pub curves: Vec<GraphBlock>,
    pub labels: Vec<usize>,
}

impl From<&MazeResult> for MazeDoc {
    fn from(m: &MazeResult) -> Self {
        Self {
            curves: m.curves.iter().map(GraphBlock::from_result).collect(),
            labels: m.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Body {
    Graph(GraphBlock),
    Ensemble(EnsembleDoc),
    Consensus(ConsensusDoc),
    Forest(ForestDoc),
    Maze(MazeDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: Body,
}

impl Document {
    pub fn new(body: Body) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialise");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let bad = |m: String| CliError::data("load", m);
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(format!("malformed JSON: {e}")))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(bad(format!(
                    "unsupported schema version {v} (this build reads version {SCHEMA_VERSION})"
                )))
            }
            None => return Err(bad("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| bad(format!("invalid document: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data("load", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError {
            message: format!("{}: {}", path.display(), e.message),
            ..e
        })
    }
}
