//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use principal_graph::{ElasticGraph, NodeEmbedding, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree on `n` nodes plus up to `extra` chords, with random moduli.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> ElasticGraph {
    let mut edges: Vec<[usize; 2]> = (1..n).map(|i| [rng.random_range(0..i), i]).collect();
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let e = [a.min(b), a.max(b)];
        if a != b && !edges.iter().any(|f| [f[0].min(f[1]), f[0].max(f[1])] == e) {
            edges.push(e);
        }
    }
    let lambda: Vec<f64> = edges.iter().map(|_| rng.random_range(0.01..2.0)).collect();
    let mut deg = vec![0; n];
    for &[a, b] in &edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let mu = deg
        .iter()
        .map(|&d| if d >= 2 { rng.random_range(0.0..1.0) } else { 0.0 })
        .collect();
    ElasticGraph::new(n, edges, lambda, mu).expect("generated graph is valid")
}

pub fn random_embedding(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> NodeEmbedding {
    let data = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    NodeEmbedding::from_flat(rows, dim, data).unwrap()
}

/// Points around a few random centres, with random positive weights when
/// `weighted`.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, weighted: bool) -> PointCloud {
    let centres: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let mut x = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let c = &centres[rng.random_range(0..centres.len())];
        x.extend(c.iter().map(|v| v + rng.random_range(-0.7..0.7)));
    }
    if weighted {
        let w = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        PointCloud::with_weights(n, dim, x, w).unwrap()
    } else {
        PointCloud::new(n, dim, x).unwrap()
    }
}

/// Embedding whose rows are distinct data points, chosen at random.
pub fn embedding_from_points(rng: &mut ChaCha8Rng, cloud: &PointCloud, rows: usize) -> NodeEmbedding {
    let idx = rand::seq::index::sample(rng, cloud.len(), rows).into_vec();
    let data: Vec<Vec<f64>> = idx.iter().map(|&i| cloud.point(i).to_vec()).collect();
    NodeEmbedding::from_rows(&data).unwrap()
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
