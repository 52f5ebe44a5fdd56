//! Run configuration: a TOML document whose every field can be overridden
//! from the command line with `--section.field value`.

use std::path::{Path, PathBuf};

use principal_graph::analysis::ExtensionMode;
use principal_graph::ensemble::{ConsensusFilters, KMeansConfig};
use principal_graph::strategy::StrategyKind;
use principal_graph::FitConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Trimming radius setting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RadiusSetting {
    /// No trimming.
    #[default]
    None,
    /// Median pairwise distance on a sample of 1000 points.
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusRepr {
    Number(f64),
    Word(String),
}

impl Serialize for RadiusSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            RadiusSetting::None => RadiusRepr::Word("none".into()),
            RadiusSetting::Auto => RadiusRepr::Word("auto".into()),
            RadiusSetting::Value(v) => RadiusRepr::Number(v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RadiusSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RadiusRepr::deserialize(d)? {
            RadiusRepr::Number(v) => Ok(RadiusSetting::Value(v)),
            RadiusRepr::Word(w) => match w.as_str() {
                "none" => Ok(RadiusSetting::None),
                "auto" => Ok(RadiusSetting::Auto),
                _ => Err(serde::de::Error::custom(format!(
                    "expected a number, \"auto\" or \"none\", got \"{w}\""
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// The strategy's own seed: principal component for curves and trees,
    /// a ring for circles.
    #[default]
    Default,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtendMode {
    #[default]
    None,
    Centroid,
    Max,
}

impl ExtendMode {
    pub fn mode(self) -> Option<ExtensionMode> {
        match self {
            ExtendMode::None => None,
            ExtendMode::Centroid => Some(ExtensionMode::Centroid),
            ExtendMode::Max => Some(ExtensionMode::Max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    /// Two of the data coordinates.
    #[default]
    Coords,
    /// Two principal components of the data.
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    pub path: Option<PathBuf>,
    pub delimiter: String,
    pub header: bool,
    /// Zero-based column holding point weights.
    pub weight_column: Option<usize>,
    /// Zero-based column holding integer labels, used to colour plots.
    pub label_column: Option<usize>,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            path: None,
            delimiter: ",".into(),
            header: false,
            weight_column: None,
            label_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub strategy: StrategyKind,
    pub nodes: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub r0: RadiusSetting,
    pub epsilon: f64,
    pub max_iter: usize,
    pub search_epsilon: f64,
    pub search_max_iter: usize,
    pub init: InitKind,
    pub density_radius: Option<f64>,
    pub seed: u64,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            strategy: StrategyKind::Tree,
            nodes: 20,
            alpha: 0.01,
            lambda: f.lambda,
            mu: f.mu,
            r0: RadiusSetting::None,
            epsilon: f.epsilon,
            max_iter: f.max_iter,
            search_epsilon: f.search_epsilon,
            search_max_iter: f.search_max_iter,
            init: InitKind::Default,
            density_radius: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub replicas: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            replicas: principal_graph::ensemble::DEFAULT_REPLICAS,
            fraction: principal_graph::ensemble::DEFAULT_SAMPLE_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusSection {
    /// Saved ensemble to summarise instead of fitting a new one.
    pub ensemble: Option<PathBuf>,
    /// Number of consensus nodes; defaults to `fit.nodes`.
    pub clusters: Option<usize>,
    /// Defaults to ⌈0.05 · replicas⌉.
    pub edge_threshold: Option<usize>,
    /// Defaults to 0.05 · replicas; 0 disables the filter.
    pub min_node_density: Option<f64>,
    pub density_radius: Option<f64>,
    pub edge_len_min: Option<f64>,
    pub edge_len_max: Option<f64>,
    pub drop_unconnected: bool,
    pub kmeans_restarts: usize,
    pub kmeans_seed: u64,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        let k = KMeansConfig::default();
        Self {
            ensemble: None,
            clusters: None,
            edge_threshold: None,
            min_node_density: None,
            density_radius: None,
            edge_len_min: None,
            edge_len_max: None,
            drop_unconnected: true,
            kmeans_restarts: k.restarts,
            kmeans_seed: k.seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Saved graph to analyse instead of fitting one.
    pub graph: Option<PathBuf>,
    pub root: Option<usize>,
    pub leaf: Option<usize>,
    pub extend: ExtendMode,
    /// Edges with fewer projected points are pruned; 0 keeps all.
    pub min_branch_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    /// Defaults to max(20, ⌈0.01 n⌉).
    pub min_remaining: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MazeSection {
    pub curves: usize,
    pub min_remaining: usize,
}

impl Default for MazeSection {
    fn default() -> Self {
        Self {
            curves: 10,
            min_remaining: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub projection: ProjectionKind,
    pub components: [usize; 2],
    /// Saved results to draw over the data.
    pub graphs: Vec<PathBuf>,
    pub size: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            projection: ProjectionKind::Coords,
            components: [0, 1],
            graphs: Vec::new(),
            size: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub strategies: Vec<StrategyKind>,
    pub nodes: Vec<usize>,
    pub points: Vec<usize>,
    pub dims: Vec<usize>,
    pub seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            strategies: vec![StrategyKind::Curve, StrategyKind::Tree],
            nodes: vec![10, 20, 40],
            points: vec![2000],
            dims: vec![3],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Result JSON; printed to standard output when unset.
    pub graph: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub pseudotime: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub bench: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: InputSection,
    pub fit: FitSection,
    pub ensemble: EnsembleSection,
    pub consensus: ConsensusSection,
    pub analysis: AnalysisSection,
    pub forest: ForestSection,
    pub maze: MazeSection,
    pub render: RenderSection,
    pub bench: BenchSection,
    pub output: OutputSection,
}

/// Every configurable field, by dotted name, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("input.path", "data table (CSV or other delimited text)"),
    ("input.delimiter", "single-character field delimiter"),
    ("input.header", "skip the first row"),
    ("input.weight_column", "zero-based column of point weights"),
    ("input.label_column", "zero-based column of integer labels for plots"),
    ("fit.strategy", "curve, circle or tree"),
    ("fit.nodes", "target node count"),
    ("fit.alpha", "branching penalty"),
    ("fit.lambda", "stretching modulus"),
    ("fit.mu", "bending modulus"),
    ("fit.r0", "trimming radius: a number, \"auto\" or \"none\""),
    ("fit.epsilon", "relative displacement tolerance of refinement fits"),
    ("fit.max_iter", "iteration cap of refinement fits"),
    (
        "fit.search_epsilon",
        "relative displacement tolerance of candidate fits",
    ),
    ("fit.search_max_iter", "iteration cap of candidate fits"),
    ("fit.init", "default or density"),
    ("fit.density_radius", "neighbourhood radius for density seeding"),
    ("fit.seed", "seed for sampling in radius and density estimates"),
    ("ensemble.replicas", "number of resampled fits"),
    ("ensemble.fraction", "share of points drawn for each fit"),
    ("ensemble.seed", "master seed of the resampling"),
    ("consensus.ensemble", "saved ensemble JSON to summarise"),
    ("consensus.clusters", "consensus node count (default fit.nodes)"),
    (
        "consensus.edge_threshold",
        "member edges needed for a consensus edge, exclusive",
    ),
    (
        "consensus.min_node_density",
        "pooled-node neighbour count below which nodes are ignored",
    ),
    ("consensus.density_radius", "radius of the pooled-node density"),
    ("consensus.edge_len_min", "drop consensus edges shorter than this"),
    ("consensus.edge_len_max", "drop consensus edges longer than this"),
    ("consensus.drop_unconnected", "remove consensus nodes without edges"),
    ("consensus.kmeans_restarts", "k-means restarts"),
    ("consensus.kmeans_seed", "k-means seed"),
    ("analysis.graph", "saved graph JSON to analyse"),
    ("analysis.root", "path start node"),
    ("analysis.leaf", "path end node"),
    ("analysis.extend", "leaf extension: none, centroid or max"),
    ("analysis.min_branch_points", "prune edges with fewer projected points"),
    (
        "forest.min_remaining",
        "stop when at most this many points are uncaptured",
    ),
    ("maze.curves", "maximum number of curves"),
    ("maze.min_remaining", "stop when fewer points are uncaptured"),
    ("render.projection", "coords or pca"),
    ("render.components", "pair of coordinates or components, e.g. [0, 1]"),
    ("render.graphs", "saved results to draw, e.g. [\"a.json\"]"),
    ("render.size", "canvas width and height"),
    ("bench.strategies", "strategies to time, e.g. [\"curve\", \"tree\"]"),
    ("bench.nodes", "node counts"),
    ("bench.points", "point counts"),
    ("bench.dims", "dimensions"),
    ("bench.seed", "data seed"),
    ("output.graph", "result JSON path"),
    ("output.assignments", "point-to-node CSV path"),
    ("output.pseudotime", "pseudotime CSV path"),
    ("output.svg", "SVG plot path"),
    ("output.trace", "energy trace CSV path"),
    ("output.labels", "point label CSV path"),
    ("output.bench", "timing CSV path"),
];

/// Reads a value given on the command line: TOML syntax when it parses as
/// such (numbers, booleans, arrays, quoted strings), a bare string otherwise.
fn parse_override(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Merges the optional TOML file with dotted overrides and checks the
    /// result. Nothing is read besides the config file.
    pub fn build(file: Option<&Path>, overrides: &[(String, String)]) -> CliResult<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, raw) in overrides {
            if !KEYS.iter().any(|(k, _)| k == key) {
                return Err(CliError::config("config", format!("unknown setting '{key}'")));
            }
            let (section, field) = key.split_once('.').expect("keys are dotted");
            let entry = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sub) = entry else {
                return Err(CliError::config("config", format!("'{section}' must be a table")));
            };
            sub.insert(field.to_string(), parse_override(raw));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn delimiter(&self) -> CliResult<u8> {
        match self.input.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ if self.input.delimiter == "\\t" => Ok(b'\t'),
            _ => Err(CliError::config(
                "config",
                format!(
                    "delimiter must be a single ASCII character, got '{}'",
                    self.input.delimiter
                ),
            )),
        }
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config("config", m));
        self.delimiter()?;
        let f = &self.fit;
        if f.nodes < 2 {
            return bad(format!("fit.nodes must be at least 2, got {}", f.nodes));
        }
        if f.strategy == StrategyKind::Circle && f.nodes < 4 {
            return bad("a circle starts from 4 nodes; fit.nodes must be at least 4".into());
        }
        if let RadiusSetting::Value(r) = f.r0 {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("fit.r0 must be positive, got {r}"));
            }
        }
        if let Some(r) = f.density_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("fit.density_radius must be positive, got {r}"));
            }
        }
        self.fit_config(f64::INFINITY)
            .validate()
            .map_err(|e| CliError::config("config", e.to_string()))?;
        if self.ensemble.replicas == 0 {
            return bad("ensemble.replicas must be at least 1".into());
        }
        if !(self.ensemble.fraction > 0.0 && self.ensemble.fraction <= 1.0) {
            return bad(format!(
                "ensemble.fraction must lie in (0, 1], got {}",
                self.ensemble.fraction
            ));
        }
        if self.clusters() < 2 {
            return bad("consensus.clusters must be at least 2".into());
        }
        if let (Some(lo), Some(hi)) = (self.consensus.edge_len_min, self.consensus.edge_len_max) {
            if lo > hi {
                return bad(format!("consensus.edge_len_min {lo} exceeds edge_len_max {hi}"));
            }
        }
        if self.analysis.root.is_some() != self.analysis.leaf.is_some() {
            return bad("analysis.root and analysis.leaf must be given together".into());
        }
        if let (Some(r), Some(l)) = (self.analysis.root, self.analysis.leaf) {
            if r == l {
                return bad("analysis.root and analysis.leaf must differ".into());
            }
        }
        if self.maze.curves == 0 {
            return bad("maze.curves must be at least 1".into());
        }
        if !(self.render.size > 0.0 && self.render.size.is_finite()) {
            return bad("render.size must be positive".into());
        }
        if self.render.components[0] == self.render.components[1] {
            return bad("render.components must name two different axes".into());
        }
        if self.bench.nodes.iter().any(|&n| n < 2) || self.bench.points.iter().any(|&n| n < 2) {
            return bad("bench.nodes and bench.points entries must be at least 2".into());
        }
        if self.bench.dims.contains(&0) {
            return bad("bench.dims entries must be positive".into());
        }
        Ok(())
    }

    /// Requirements specific to one subcommand, checked before any compute.
    pub fn require(&self, command: &str) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::config("config", m.to_string()));
        let needs_input = !matches!(command, "bench");
        if needs_input && self.input.path.is_none() {
            return bad("input.path is required");
        }
        match command {
            "pseudotime" if self.analysis.root.is_none() => bad("pseudotime needs analysis.root and analysis.leaf"),
            "maze" if self.fit.r0 == RadiusSetting::None => {
                bad("maze needs a finite trimming radius (fit.r0 = number or \"auto\")")
            }
            _ => Ok(()),
        }
    }

    pub fn fit_config(&self, r0: f64) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            epsilon: f.epsilon,
            max_iter: f.max_iter,
            search_epsilon: f.search_epsilon,
            search_max_iter: f.search_max_iter,
            r0,
            alpha: f.alpha,
            lambda: f.lambda,
            mu: f.mu,
        }
    }

    pub fn clusters(&self) -> usize {
        self.consensus.clusters.unwrap_or(self.fit.nodes)
    }

    pub fn edge_threshold(&self, replicas: usize) -> usize {
        self.consensus
            .edge_threshold
            .unwrap_or_else(|| (0.05 * replicas as f64).ceil() as usize)
    }

    pub fn consensus_filters(&self, replicas: usize) -> ConsensusFilters {
        let c = &self.consensus;
        let defaults = ConsensusFilters::defaults_for(replicas);
        ConsensusFilters {
            min_node_local_density: match c.min_node_density {
                Some(d) if d > 0.0 => Some(d),
                Some(_) => None,
                None => defaults.min_node_local_density,
            },
            density_radius: c.density_radius,
            edge_len_min: c.edge_len_min,
            edge_len_max: c.edge_len_max,
            drop_unconnected: c.drop_unconnected,
        }
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            restarts: self.consensus.kmeans_restarts,
            seed: self.consensus.kmeans_seed,
            ..KMeansConfig::default()
        }
    }
}
