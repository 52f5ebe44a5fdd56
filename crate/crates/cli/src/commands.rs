//! The subcommands: each loads its inputs, runs one pipeline and writes the
//! configured outputs.

use std::path::Path;
use std::time::Instant;

use principal_graph::analysis::{extend_leaves, filter_branches, project_dataset, pseudotime};
use principal_graph::ensemble::{bootstrap_ensemble, consensus_graph, filter_consensus, GraphEnsemble};
use principal_graph::robust::{
    default_min_remaining, estimate_trimming_radius, principal_forest, travel_maze_cluster, MazeParams,
};
use principal_graph::strategy::{grow_graph, grow_graph_observed, make_strategy, InitSpec, Strategy, StrategyKind};
use principal_graph::synthetic::{line, pad_dimensions, three_arm_star, tripod};
use principal_graph::{
    partition_points, total_energy, ElasticGraph, EnergyBreakdown, EnergyParams, NodeEmbedding, Partition,
};

use crate::config::{InitKind, ProjectionKind, RadiusSetting, RunConfig};
use crate::error::{AtStage, CliError, CliResult};
use crate::io::{self, BenchRow, Table, TableFormat};
use crate::schema::{Body, ConsensusDoc, Document, EnsembleDoc, ForestDoc, GraphBlock, MazeDoc};
use crate::svg::{render_svg, Layer, Projection, Stroke};

pub const COMMANDS: &[(&str, &str)] = &[
    ("fit", "grow a principal graph and write it with its diagnostics"),
    ("ensemble", "fit graphs on resampled subsets of the data"),
    ("consensus", "summarise an ensemble into one consensus graph"),
    ("forest", "cover the data with disjoint trimmed graphs"),
    ("maze", "cluster the data by local principal curves"),
    ("pseudotime", "pseudotime of every point along a root-to-leaf path"),
    ("render", "draw the data and saved results as SVG"),
    ("bench", "time structure search on synthetic data"),
];

/// Runs `command` under `cfg`. Progress goes to standard error when `verbose`.
pub fn run(command: &str, cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    cfg.require(command)?;
    match command {
        "fit" => fit(cfg, verbose),
        "ensemble" => ensemble(cfg, verbose),
        "consensus" => consensus(cfg, verbose),
        "forest" => forest(cfg, verbose),
        "maze" => maze(cfg, verbose),
        "pseudotime" => pseudotime_command(cfg, verbose),
        "render" => render(cfg),
        "bench" => bench(cfg, verbose),
        other => Err(CliError::config("command", format!("unknown subcommand '{other}'"))),
    }
}

fn load_input(cfg: &RunConfig) -> CliResult<Table> {
    let path = cfg.input.path.as_deref().expect("input presence is checked up front");
    io::load_matrix(
        path,
        &TableFormat {
            delimiter: cfg.delimiter()?,
            header: cfg.input.header,
            weight_column: cfg.input.weight_column,
            label_column: cfg.input.label_column,
        },
    )
}

fn resolve_r0(cfg: &RunConfig, table: &Table) -> CliResult<f64> {
    match cfg.fit.r0 {
        RadiusSetting::None => Ok(f64::INFINITY),
        RadiusSetting::Value(r) => Ok(r),
        RadiusSetting::Auto => estimate_trimming_radius(&table.cloud, 1000, 0.5, cfg.fit.seed).at("radius"),
    }
}

fn strategy(cfg: &RunConfig) -> CliResult<Strategy> {
    let s = make_strategy(cfg.fit.strategy, cfg.fit.nodes, cfg.fit.alpha).at("config")?;
    match cfg.fit.init {
        InitKind::Default => Ok(s),
        InitKind::Density => s
            .with_init(InitSpec::Density {
                radius: cfg.fit.density_radius,
                seed: cfg.fit.seed,
            })
            .at("config"),
    }
}

fn projection(cfg: &RunConfig) -> Projection {
    let [i, j] = cfg.render.components;
    match cfg.render.projection {
        ProjectionKind::Coords => Projection::Coordinates(i, j),
        ProjectionKind::Pca => Projection::Principal(i, j),
    }
}

fn write_svg(cfg: &RunConfig, table: &Table, labels: Option<&[Option<usize>]>, layers: &[Layer<'_>]) -> CliResult<()> {
    if let Some(path) = &cfg.output.svg {
        let labels = labels.or(table.labels.as_deref());
        let svg = render_svg(&table.cloud, labels, layers, projection(cfg), cfg.render.size)?;
        io::write_text(Some(path), &svg)?;
    }
    Ok(())
}

fn write_document(cfg: &RunConfig, body: Body) -> CliResult<()> {
    io::write_text(cfg.output.graph.as_deref(), &Document::new(body).to_json())
}

/// A fitted and post-processed graph with its partition of the data.
struct Fitted {
    graph: ElasticGraph,
    embedding: NodeEmbedding,
    partition: Partition,
    block: GraphBlock,
    trace: Vec<EnergyBreakdown>,
}

fn fit_graph(cfg: &RunConfig, table: &Table, verbose: bool) -> CliResult<Fitted> {
    let r0 = resolve_r0(cfg, table)?;
    let s = strategy(cfg)?;
    let res = grow_graph_observed(&table.cloud, &s, &cfg.fit_config(r0), |rec, _| {
        if verbose {
            eprintln!(
                "phase {} {} nodes={} energy={} refined={}",
                rec.phase,
                rec.kind.name(),
                rec.node_count,
                rec.energy,
                rec.energy_after
            );
        }
    })
    .at("fit")?;
    if verbose {
        for (i, e) in res.trace.iter().enumerate() {
            eprintln!(
                "iteration {i} mse={} u_e={} u_r={} total={} trimmed={}",
                e.mse, e.u_e, e.u_r, e.total, e.trimmed_count
            );
        }
    }
    let mut graph = res.graph.clone();
    let mut embedding = res.embedding.clone();
    let mut changed = false;
    if let Some(mode) = cfg.analysis.extend.mode() {
        (graph, embedding) = extend_leaves(&graph, &embedding, &table.cloud, mode).at("extend")?;
        changed = true;
    }
    if cfg.analysis.min_branch_points > 0 {
        (graph, embedding) =
            filter_branches(&graph, &embedding, &table.cloud, cfg.analysis.min_branch_points).at("filter")?;
        changed = true;
    }
    let mut block = GraphBlock::from_result(&res);
    let partition = if changed {
        let p = partition_points(&table.cloud, &embedding, r0);
        let e = total_energy(
            &table.cloud,
            &graph,
            &embedding,
            &p,
            EnergyParams { alpha: res.alpha, r0 },
        )
        .at("fit")?;
        block = GraphBlock {
            energy: Some((&e).into()),
            history: block.history,
            ..GraphBlock::new(&graph, &embedding, res.alpha, r0)
        };
        p
    } else {
        res.partition.clone()
    };
    Ok(Fitted {
        graph,
        embedding,
        partition,
        block,
        trace: res.trace,
    })
}

fn write_pseudotime_for(
    cfg: &RunConfig,
    table: &Table,
    graph: &ElasticGraph,
    embedding: &NodeEmbedding,
) -> CliResult<()> {
    let (Some(root), Some(leaf)) = (cfg.analysis.root, cfg.analysis.leaf) else {
        return Ok(());
    };
    for v in [root, leaf] {
        if v >= graph.node_count() {
            return Err(CliError::config(
                "pseudotime",
                format!("node {v} does not exist; the graph has {} nodes", graph.node_count()),
            ));
        }
    }
    let proj = project_dataset(graph, embedding, &table.cloud).at("pseudotime")?;
    let tab = pseudotime(graph, embedding, &proj, root, leaf).at("pseudotime")?;
    io::write_pseudotime(cfg.output.pseudotime.as_deref(), &tab)
}

fn fit(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let f = fit_graph(cfg, &table, verbose)?;
    write_document(cfg, Body::Graph(f.block.clone()))?;
    if let Some(p) = &cfg.output.assignments {
        io::write_assignments(Some(p), &f.partition)?;
    }
    if let Some(p) = &cfg.output.trace {
        io::write_trace(Some(p), &f.trace)?;
    }
    if cfg.output.pseudotime.is_some() {
        write_pseudotime_for(cfg, &table, &f.graph, &f.embedding)?;
    }
    write_svg(
        cfg,
        &table,
        None,
        &[Layer {
            graph: &f.graph,
            embedding: &f.embedding,
            stroke: Stroke::Thick,
        }],
    )
}

fn load_graph(path: &Path) -> CliResult<(ElasticGraph, NodeEmbedding)> {
    match Document::load(path)?.body {
        Body::Graph(b) => b.graph(),
        _ => Err(CliError::data(
            "load",
            format!("{} does not hold a single graph", path.display()),
        )),
    }
}

fn pseudotime_command(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let (graph, embedding) = match &cfg.analysis.graph {
        Some(path) => load_graph(path)?,
        None => {
            let f = fit_graph(cfg, &table, verbose)?;
            if cfg.output.graph.is_some() {
                write_document(cfg, Body::Graph(f.block))?;
            }
            (f.graph, f.embedding)
        }
    };
    if graph.edge_count() == 0 {
        return Err(CliError::data("pseudotime", "graph has no edges"));
    }
    write_pseudotime_for(cfg, &table, &graph, &embedding)?;
    write_svg(
        cfg,
        &table,
        None,
        &[Layer {
            graph: &graph,
            embedding: &embedding,
            stroke: Stroke::Thick,
        }],
    )
}

fn fit_ensemble(cfg: &RunConfig, table: &Table, verbose: bool) -> CliResult<(GraphEnsemble, f64)> {
    let r0 = resolve_r0(cfg, table)?;
    let s = strategy(cfg)?;
    let start = Instant::now();
    let ens = bootstrap_ensemble(
        &table.cloud,
        &s,
        &cfg.fit_config(r0),
        cfg.ensemble.replicas,
        cfg.ensemble.fraction,
        cfg.ensemble.seed,
    )
    .at("ensemble")?;
    if verbose {
        for (i, m) in ens.members.iter().enumerate() {
            eprintln!("member {i} nodes={} energy={}", m.graph.node_count(), m.energy.total);
        }
        eprintln!(
            "ensemble of {} fitted in {:.2}s",
            ens.replicas(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok((ens, r0))
}

fn member_layers(ens: &GraphEnsemble) -> Vec<Layer<'_>> {
    ens.members
        .iter()
        .map(|m| Layer {
            graph: &m.graph,
            embedding: &m.embedding,
            stroke: Stroke::Thin,
        })
        .collect()
}

fn ensemble(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let (ens, r0) = fit_ensemble(cfg, &table, verbose)?;
    write_document(cfg, Body::Ensemble(EnsembleDoc::new(&ens, cfg.fit.alpha, r0)))?;
    write_svg(cfg, &table, None, &member_layers(&ens))
}

fn consensus(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let ens = match &cfg.consensus.ensemble {
        Some(path) => match Document::load(path)?.body {
            Body::Ensemble(doc) => doc.ensemble()?,
            _ => {
                return Err(CliError::data(
                    "load",
                    format!("{} does not hold an ensemble", path.display()),
                ))
            }
        },
        None => fit_ensemble(cfg, &table, verbose)?.0,
    };
    let k = ens.replicas();
    let raw = consensus_graph(&ens, cfg.clusters(), cfg.edge_threshold(k), cfg.kmeans()).at("consensus")?;
    let c = filter_consensus(&raw, &cfg.consensus_filters(k)).at("consensus")?;
    if verbose {
        eprintln!(
            "consensus: {} nodes, {} edges before filtering; {} nodes, {} edges after",
            raw.node_count(),
            raw.edges.len(),
            c.node_count(),
            c.edges.len()
        );
    }
    write_document(cfg, Body::Consensus(ConsensusDoc::from(&c)))?;
    let (g, e) = c.to_graph(cfg.fit.lambda, cfg.fit.mu).at("consensus")?;
    let mut layers = member_layers(&ens);
    layers.push(Layer {
        graph: &g,
        embedding: &e,
        stroke: Stroke::Thick,
    });
    write_svg(cfg, &table, None, &layers)
}

fn forest(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let r0 = resolve_r0(cfg, &table)?;
    let s = strategy(cfg)?;
    let min_remaining = cfg
        .forest
        .min_remaining
        .unwrap_or_else(|| default_min_remaining(table.cloud.len()));
    let f = principal_forest(
        &table.cloud,
        &s,
        &cfg.fit_config(r0),
        min_remaining,
        cfg.fit.density_radius,
        cfg.fit.seed,
    )
    .at("forest")?;
    if verbose {
        for (i, g) in f.graphs.iter().enumerate() {
            let caught = f.labels.iter().filter(|l| **l == Some(i)).count();
            eprintln!("graph {i}: {} nodes, {caught} points captured", g.graph.node_count());
        }
    }
    write_document(cfg, Body::Forest(ForestDoc::from(&f)))?;
    if let Some(p) = &cfg.output.labels {
        io::write_labels(Some(p), &f.labels)?;
    }
    let layers: Vec<Layer<'_>> = f
        .graphs
        .iter()
        .map(|g| Layer {
            graph: &g.graph,
            embedding: &g.embedding,
            stroke: Stroke::Thick,
        })
        .collect();
    write_svg(cfg, &table, Some(&f.labels), &layers)
}

fn maze(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let table = load_input(cfg)?;
    let r0 = resolve_r0(cfg, &table)?;
    let params = MazeParams {
        nodes: cfg.fit.nodes,
        max_curves: cfg.maze.curves,
        min_remaining: cfg.maze.min_remaining,
        density_radius: cfg.fit.density_radius,
        seed: cfg.fit.seed,
    };
    let m = travel_maze_cluster(&table.cloud, &cfg.fit_config(r0), &params).at("maze")?;
    if verbose {
        for (i, c) in m.curves.iter().enumerate() {
            let n = m.labels.iter().filter(|&&l| l == i).count();
            eprintln!("curve {i}: energy={} points={n}", c.energy.total);
        }
    }
    write_document(cfg, Body::Maze(MazeDoc::from(&m)))?;
    let labels: Vec<Option<usize>> = m.labels.iter().map(|&l| Some(l)).collect();
    if let Some(p) = &cfg.output.labels {
        io::write_labels(Some(p), &labels)?;
    }
    let layers: Vec<Layer<'_>> = m
        .curves
        .iter()
        .map(|g| Layer {
            graph: &g.graph,
            embedding: &g.embedding,
            stroke: Stroke::Thick,
        })
        .collect();
    write_svg(cfg, &table, Some(&labels), &layers)
}

fn render(cfg: &RunConfig) -> CliResult<()> {
    let table = load_input(cfg)?;
    let mut graphs: Vec<(ElasticGraph, NodeEmbedding, Stroke)> = Vec::new();
    for path in &cfg.render.graphs {
        match Document::load(path)?.body {
            Body::Graph(b) => {
                let (g, e) = b.graph()?;
                graphs.push((g, e, Stroke::Thick));
            }
            Body::Ensemble(doc) => {
                for m in &doc.members {
                    let (g, e) = m.graph.graph()?;
                    graphs.push((g, e, Stroke::Thin));
                }
            }
            Body::Consensus(doc) => {
                let (g, e) = doc.consensus().to_graph(cfg.fit.lambda, cfg.fit.mu).at("render")?;
                graphs.push((g, e, Stroke::Thick));
            }
            Body::Forest(doc) => {
                for b in &doc.graphs {
                    let (g, e) = b.graph()?;
                    graphs.push((g, e, Stroke::Thick));
                }
            }
            Body::Maze(doc) => {
                for b in &doc.curves {
                    let (g, e) = b.graph()?;
                    graphs.push((g, e, Stroke::Thick));
                }
            }
        }
    }
    let layers: Vec<Layer<'_>> = graphs
        .iter()
        .map(|(g, e, s)| Layer {
            graph: g,
            embedding: e,
            stroke: *s,
        })
        .collect();
    let svg = render_svg(
        &table.cloud,
        table.labels.as_deref(),
        &layers,
        projection(cfg),
        cfg.render.size,
    )?;
    io::write_text(cfg.output.svg.as_deref(), &svg)
}

/// Three noisy arms from a common centre in `dims` dimensions, `points` in total.
pub fn bench_data(points: usize, dims: usize, seed: u64) -> CliResult<principal_graph::PointCloud> {
    let per_arm = points.div_ceil(3);
    let data = match dims {
        1 => line(points, 1, 0.05, seed),
        2 => three_arm_star(per_arm, 0.05, seed),
        _ => tripod(per_arm, 0.05, seed).and_then(|t| pad_dimensions(t, dims, 0.05, seed.wrapping_add(1))),
    }
    .at("bench")?;
    let rows: Vec<Vec<f64>> = data.cloud.points().take(points).map(<[f64]>::to_vec).collect();
    principal_graph::PointCloud::from_rows(&rows).at("bench")
}

fn bench(cfg: &RunConfig, verbose: bool) -> CliResult<()> {
    let b = &cfg.bench;
    let mut rows = Vec::new();
    for &dims in &b.dims {
        for &points in &b.points {
            let cloud = bench_data(points, dims, b.seed)?;
            for &kind in &b.strategies {
                for &nodes in &b.nodes {
                    if kind == StrategyKind::Circle && nodes < 4 {
                        continue;
                    }
                    let s = make_strategy(kind, nodes, cfg.fit.alpha).at("bench")?;
                    let start = Instant::now();
                    grow_graph(&cloud, &s, &cfg.fit_config(f64::INFINITY)).at("bench")?;
                    let row = BenchRow {
                        strategy: kind.name(),
                        nodes,
                        points: cloud.len(),
                        dims,
                        seconds: start.elapsed().as_secs_f64(),
                    };
                    if verbose {
                        eprintln!(
                            "{} nodes={} points={} dims={} seconds={:.3}",
                            row.strategy, nodes, row.points, dims, row.seconds
                        );
                    }
                    rows.push(row);
                }
            }
        }
    }
    io::write_bench(cfg.output.bench.as_deref(), &rows)
}
