//! Structure search: grows a graph by repeatedly applying the operations of
//! a grammar set and keeping the candidate of lowest energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{NodeEmbedding, PointCloud};
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::fit::{fit_embedding, FitConfig, FitResult, Partition};
use crate::grammar::{enumerate_candidates, GrammarRule, Moduli, OpKind, Target};
use crate::graph::ElasticGraph;
use crate::init::{init_default, init_ring};
use crate::robust::{density_seed, estimate_trimming_radius};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Curve,
    Circle,
    Tree,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Curve => "curve",
            StrategyKind::Circle => "circle",
            StrategyKind::Tree => "tree",
        }
    }

    /// Whether `graph` has the shape this strategy is meant to produce.
    pub fn admits(self, graph: &ElasticGraph) -> bool {
        let connected = graph.component_count() == 1;
        let deg = graph.degrees();
        match self {
            StrategyKind::Curve => connected && graph.is_acyclic() && deg.iter().all(|&d| d <= 2),
            StrategyKind::Circle => {
                connected && deg.iter().all(|&d| d == 2) && graph.edge_count() == graph.node_count()
            }
            StrategyKind::Tree => connected && graph.is_acyclic(),
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curve" => Ok(StrategyKind::Curve),
            "circle" => Ok(StrategyKind::Circle),
            "tree" => Ok(StrategyKind::Tree),
            _ => Err(Error::InvalidArgument(format!("unknown strategy '{s}'"))),
        }
    }
}

/// How the search is seeded.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Two nodes along the first principal component.
    PrincipalComponent,
    /// Four nodes on a ring in the plane of the two leading components.
    Ring,
    /// Two nodes at the densest data point and its nearest distinct neighbour.
    /// Without a radius, one is estimated from the data.
    Density { radius: Option<f64>, seed: u64 },
    Given {
        graph: ElasticGraph,
        embedding: NodeEmbedding,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Grammar sets applied in turn, one per phase.
    pub grammar_cycle: Vec<Vec<GrammarRule>>,
    pub init: InitSpec,
    pub target_nodes: usize,
    pub alpha: f64,
}

impl Strategy {
    fn init_size(&self) -> usize {
        match &self.init {
            InitSpec::Ring => 4,
            InitSpec::Given { graph, .. } => graph.node_count(),
            _ => 2,
        }
    }

    pub fn with_init(mut self, init: InitSpec) -> Result<Self> {
        self.init = init;
        if self.target_nodes < self.init_size() {
            return Err(Error::InvalidArgument(format!(
                "target of {} nodes is below the initial size {}",
                self.target_nodes,
                self.init_size()
            )));
        }
        Ok(self)
    }
}

pub fn make_strategy(kind: StrategyKind, target_nodes: usize, alpha: f64) -> Result<Strategy> {
    use OpKind::*;
    let (cycle, init) = match kind {
        StrategyKind::Curve => (vec![vec![GrammarRule::new(BisectEdge)]], InitSpec::PrincipalComponent),
        StrategyKind::Circle => (vec![vec![GrammarRule::new(BisectEdge)]], InitSpec::Ring),
        StrategyKind::Tree => {
            let grow = vec![GrammarRule::new(BisectEdge), GrammarRule::new(AddNodeToNode)];
            let shrink = vec![GrammarRule::new(RemoveLeaf), GrammarRule::new(ShrinkInternalEdge)];
            (vec![grow.clone(), grow, shrink], InitSpec::PrincipalComponent)
        }
    };
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    Strategy {
        kind,
        grammar_cycle: cycle,
        init: InitSpec::PrincipalComponent,
        target_nodes,
        alpha,
    }
    .with_init(init)
}

/// One step of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub kind: OpKind,
    /// Target in the indices of the graph before the operation.
    pub target: Target,
    /// Energy of the accepted candidate after its coarse fit.
    pub energy: f64,
    /// Coarse energies of all candidates in enumeration order; failed fits are infinite.
    pub candidate_energies: Vec<f64>,
    pub accepted: usize,
    /// Energy after refining the accepted candidate.
    pub energy_after: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalGraphResult {
    pub graph: ElasticGraph,
    pub embedding: NodeEmbedding,
    pub partition: Partition,
    pub energy: EnergyBreakdown,
    pub alpha: f64,
    pub r0: f64,
    pub history: Vec<PhaseRecord>,
    /// Objective trace of the last refinement fit.
    pub trace: Vec<EnergyBreakdown>,
}

fn seed_graph(cloud: &PointCloud, init: &InitSpec, config: &FitConfig) -> Result<(ElasticGraph, NodeEmbedding)> {
    match init {
        InitSpec::PrincipalComponent => init_default(cloud, config.lambda),
        InitSpec::Ring => init_ring(cloud, config.lambda, config.mu),
        InitSpec::Density { radius, seed } => {
            let radius = match radius {
                Some(r) => *r,
                None => estimate_trimming_radius(cloud, 1000, 0.25, *seed)?,
            };
            density_seed(cloud, radius, *seed, config.lambda)
        }
        InitSpec::Given { graph, embedding } => Ok((graph.clone(), embedding.clone())),
    }
}

/// Runs the structure search until the graph reaches the strategy's target size.
pub fn grow_graph(cloud: &PointCloud, strategy: &Strategy, config: &FitConfig) -> Result<PrincipalGraphResult> {
    grow_graph_observed(cloud, strategy, config, |_, _| {})
}

/// As [`grow_graph`], calling `observe` with every accepted phase and the graph it produced.
pub fn grow_graph_observed(
    cloud: &PointCloud,
    strategy: &Strategy,
    config: &FitConfig,
    mut observe: impl FnMut(&PhaseRecord, &ElasticGraph),
) -> Result<PrincipalGraphResult> {
    let cfg = FitConfig {
        alpha: strategy.alpha,
        ..*config
    };
    cfg.validate()?;
    if strategy.grammar_cycle.is_empty() || strategy.grammar_cycle.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument("grammar sets must be nonempty".into()));
    }
    let (mut graph, init) = seed_graph(cloud, &strategy.init, &cfg)?;
    graph.validate().into_result()?;
    if strategy.target_nodes < graph.node_count() {
        return Err(Error::InvalidArgument(format!(
            "target of {} nodes is below the initial size {}",
            strategy.target_nodes,
            graph.node_count()
        )));
    }
    let defaults = Moduli {
        lambda: cfg.lambda,
        mu: cfg.mu,
    };
    let coarse = cfg.coarse();
    let mut current: FitResult = fit_embedding(cloud, &graph, &init, &cfg)?;
    let mut history = Vec::new();
    let mut phase = 0;
    while graph.node_count() < strategy.target_nodes {
        let rules = &strategy.grammar_cycle[phase % strategy.grammar_cycle.len()];
        let candidates = enumerate_candidates(&graph, &current.embedding, cloud, &current.partition, rules, defaults)?;
        if candidates.is_empty() {
            return Err(Error::NoAdmissibleCandidate { phase });
        }
        let fits: Vec<Result<FitResult>> = candidates
            .par_iter()
            .map(|c| fit_embedding(cloud, &c.graph, &c.embedding, &coarse))
            .collect();
        let energies: Vec<f64> = fits
            .iter()
            .map(|f| f.as_ref().map_or(f64::INFINITY, |r| r.energy.total))
            .collect();
        let mut best: Option<usize> = None;
        for (i, e) in energies.iter().enumerate() {
            if fits[i].is_ok() && best.is_none_or(|b| *e < energies[b]) {
                best = Some(i);
            }
        }
        let Some(best) = best else {
            return Err(fits
                .into_iter()
                .find_map(|f| f.err())
                .expect("all candidate fits failed"));
        };
        let winner = &candidates[best];
        let coarse_fit = fits[best].as_ref().expect("winner fit succeeded");
        let refined = fit_embedding(cloud, &winner.graph, &coarse_fit.embedding, &cfg)?;
        let record = PhaseRecord {
            phase,
            kind: winner.kind,
            target: winner.target,
            energy: energies[best],
            candidate_energies: energies.clone(),
            accepted: best,
            energy_after: refined.energy.total,
            node_count: winner.graph.node_count(),
        };
        graph = winner.graph.clone();
        current = refined;
        observe(&record, &graph);
        history.push(record);
        phase += 1;
    }
    Ok(PrincipalGraphResult {
        graph,
        embedding: current.embedding,
        partition: current.partition,
        energy: current.energy,
        alpha: cfg.alpha,
        r0: cfg.r0,
        history,
        trace: current.trace,
    })
}
