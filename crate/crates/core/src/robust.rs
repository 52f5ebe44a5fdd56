//! Trimming radius estimation, density-based seeding, principal forests and
//! travel-maze clustering by local principal curves.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::project_dataset;
use crate::data::{sq_dist, NodeEmbedding, PointCloud};
use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::graph::ElasticGraph;
use crate::strategy::{grow_graph, make_strategy, InitSpec, PrincipalGraphResult, Strategy, StrategyKind};

/// Largest sample on which local densities are estimated.
pub const DENSITY_SAMPLE: usize = 2000;

/// Sorted uniform sample of at most `size` indices from `0..n`.
fn sample_indices(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= size {
        return (0..n).collect();
    }
    let mut idx = sample(rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Linearly interpolated quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// The `quantile` of pairwise distances among a uniform sample of
/// `min(sample_size, n)` points.
pub fn estimate_trimming_radius(cloud: &PointCloud, sample_size: usize, quantile: f64, seed: u64) -> Result<f64> {
    if sample_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample size must be at least 2, got {sample_size}"
        )));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidArgument(format!(
            "quantile must lie in [0, 1], got {quantile}"
        )));
    }
    if cloud.len() < 2 {
        return Err(Error::ZeroRadius);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = sample_indices(cloud.len(), sample_size, &mut rng);
    let mut d = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            d.push(sq_dist(cloud.point(i), cloud.point(j)).sqrt());
        }
    }
    d.sort_unstable_by(f64::total_cmp);
    let r = quantile_sorted(&d, quantile);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::ZeroRadius)
    }
}

/// Among `candidates` (sorted), the point with the most neighbours within
/// `radius`, counted on a uniform sample of at most [`DENSITY_SAMPLE`]
/// candidates. Ties go to the lowest point index.
fn densest(cloud: &PointCloud, candidates: &[usize], radius: f64, rng: &mut ChaCha8Rng) -> usize {
    let pick = sample_indices(candidates.len(), DENSITY_SAMPLE, rng);
    let pts: Vec<usize> = pick.into_iter().map(|k| candidates[k]).collect();
    let r2 = radius * radius;
    let mut best = (pts[0], 0usize);
    for &i in &pts {
        let count = pts
            .iter()
            .filter(|&&j| sq_dist(cloud.point(i), cloud.point(j)) <= r2)
            .count();
        if count > best.1 {
            best = (i, count);
        }
    }
    best.0
}

/// The nearest point to `from` among `candidates` that does not coincide with it.
fn nearest_distinct(cloud: &PointCloud, from: usize, candidates: &[usize]) -> Option<usize> {
    let p = cloud.point(from);
    let mut best: Option<(usize, f64)> = None;
    for &j in candidates {
        let d = sq_dist(p, cloud.point(j));
        if d > 0.0 && best.is_none_or(|(_, b)| d < b) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

fn two_node_seed(cloud: &PointCloud, a: usize, b: usize, lambda: f64) -> Result<(ElasticGraph, NodeEmbedding)> {
    let graph = ElasticGraph::new(2, vec![[0, 1]], vec![lambda], vec![0.0, 0.0])?;
    let emb = NodeEmbedding::from_rows(&[cloud.point(a).to_vec(), cloud.point(b).to_vec()])?;
    Ok((graph, emb))
}

fn seed_among(cloud: &PointCloud, candidates: &[usize], radius: f64, rng: &mut ChaCha8Rng) -> Result<(usize, usize)> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "density radius must be positive, got {radius}"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::DegenerateData("no points to seed from".into()));
    }
    let first = densest(cloud, candidates, radius, rng);
    let second = nearest_distinct(cloud, first, candidates)
        .ok_or_else(|| Error::DegenerateData("fewer than two distinct points".into()))?;
    Ok((first, second))
}

/// A two-node graph at the densest point and the nearest point distinct from it.
pub fn density_seed(
    cloud: &PointCloud,
    density_radius: f64,
    seed: u64,
    lambda: f64,
) -> Result<(ElasticGraph, NodeEmbedding)> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = seed_among(cloud, &all, density_radius, &mut rng)?;
    two_node_seed(cloud, a, b, lambda)
}

/// Indices of points within `r0` of some node of `embedding`.
fn captured_by(cloud: &PointCloud, points: &[usize], embedding: &NodeEmbedding, r0: f64) -> Vec<usize> {
    let r2 = r0 * r0;
    points
        .iter()
        .copied()
        .filter(|&i| embedding.rows().any(|node| sq_dist(cloud.point(i), node) < r2))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestResult {
    /// Fitted graphs in capture order. Each graph's partition refers to the
    /// points that were still uncaptured when it was fitted.
    pub graphs: Vec<PrincipalGraphResult>,
    /// Graph that captured each point; `None` when no graph did.
    pub labels: Vec<Option<usize>>,
}

pub fn default_min_remaining(n: usize) -> usize {
    20.max((0.01 * n as f64).ceil() as usize)
}

/// Covers the data with disjoint graphs: seed at the densest remaining
/// point, grow a trimmed graph on the remaining points, remove the points it
/// captures, repeat.
pub fn principal_forest(
    cloud: &PointCloud,
    strategy: &Strategy,
    config: &FitConfig,
    min_remaining: usize,
    density_radius: Option<f64>,
    seed: u64,
) -> Result<ForestResult> {
    let mut labels = vec![None; cloud.len()];
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut graphs = Vec::new();
    let radius = match density_radius {
        Some(r) => r,
        None => estimate_trimming_radius(cloud, 1000, 0.25, seed)?,
    };
    while remaining.len() > min_remaining {
        let sub = cloud.subset(&remaining)?;
        let round = seed.wrapping_add(graphs.len() as u64);
        let s = strategy.clone().with_init(InitSpec::Density {
            radius: Some(radius),
            seed: round,
        })?;
        let fit = grow_graph(&sub, &s, config)?;
        let local: Vec<usize> = (0..remaining.len()).collect();
        let caught = captured_by(&sub, &local, &fit.embedding, config.r0);
        if caught.is_empty() {
            break;
        }
        let label = graphs.len();
        let mut taken = vec![false; remaining.len()];
        for k in caught {
            taken[k] = true;
            labels[remaining[k]] = Some(label);
        }
        remaining = remaining
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(&i, _)| i)
            .collect();
        graphs.push(fit);
    }
    Ok(ForestResult { graphs, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeParams {
    /// Node count of every local curve.
    pub nodes: usize,
    pub max_curves: usize,
    /// Stop once fewer points than this remain uncaptured.
    pub min_remaining: usize,
    pub density_radius: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeResult {
    pub curves: Vec<PrincipalGraphResult>,
    /// Curve nearest to each point.
    pub labels: Vec<usize>,
}

/// Clusters the data by local principal curves: each curve is seeded at a
/// neighbouring pair of uncaptured points and fitted to the whole dataset
/// with trimming; points within the trimming radius of its nodes are then
/// captured.
pub fn travel_maze_cluster(cloud: &PointCloud, config: &FitConfig, params: &MazeParams) -> Result<MazeResult> {
    if !config.r0.is_finite() {
        return Err(Error::InvalidArgument(
            "travel maze clustering needs a finite trimming radius".into(),
        ));
    }
    let radius = match params.density_radius {
        Some(r) => r,
        None => estimate_trimming_radius(cloud, 1000, 0.25, params.seed)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut captured = vec![false; cloud.len()];
    let mut curves: Vec<PrincipalGraphResult> = Vec::new();
    while curves.len() < params.max_curves {
        let free: Vec<usize> = (0..cloud.len()).filter(|&i| !captured[i]).collect();
        if free.len() < params.min_remaining.max(2) {
            break;
        }
        let (a, b) = match seed_among(cloud, &free, radius, &mut rng) {
            Ok(pair) => pair,
            Err(Error::DegenerateData(_)) => break,
            Err(e) => return Err(e),
        };
        let (graph, embedding) = two_node_seed(cloud, a, b, config.lambda)?;
        let strategy = make_strategy(StrategyKind::Curve, params.nodes, config.alpha)?
            .with_init(InitSpec::Given { graph, embedding })?;
        let fit = grow_graph(cloud, &strategy, config)?;
        let caught = captured_by(cloud, &free, &fit.embedding, config.r0);
        if caught.is_empty() {
            break;
        }
        for i in caught {
            captured[i] = true;
        }
        curves.push(fit);
    }
    if curves.is_empty() {
        return Err(Error::DegenerateData("no curve captured any point".into()));
    }
    let mut best = vec![(0usize, f64::INFINITY); cloud.len()];
    for (c, fit) in curves.iter().enumerate() {
        let proj = project_dataset(&fit.graph, &fit.embedding, cloud)?;
        for (b, p) in best.iter_mut().zip(proj) {
            if p.sqdist < b.1 {
                *b = (c, p.sqdist);
            }
        }
    }
    Ok(MazeResult {
        curves,
        labels: best.into_iter().map(|(c, _)| c).collect(),
    })
}
