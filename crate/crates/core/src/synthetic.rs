//! Seeded generators of benchmark datasets with known structure.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::PointCloud;
use crate::error::Result;

/// A generated dataset with the label of the component that produced each
/// point and the line segments of the generating skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub cloud: PointCloud,
    pub labels: Vec<usize>,
    pub skeleton: Vec<[Vec<f64>; 2]>,
}

/// Label given to background noise points.
pub const NOISE: usize = usize::MAX;

struct Builder {
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    skeleton: Vec<[Vec<f64>; 2]>,
}

impl Builder {
    fn new(seed: u64, sdev: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: Normal::new(0.0, sdev.max(0.0)).expect("finite noise level"),
            rows: Vec::new(),
            labels: Vec::new(),
            skeleton: Vec::new(),
        }
    }

    fn jitter(&mut self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| v + self.noise.sample(&mut self.rng)).collect()
    }

    /// `count` points spread uniformly along the segment `a → b`.
    fn segment(&mut self, a: &[f64], b: &[f64], count: usize, label: usize) {
        for _ in 0..count {
            let t: f64 = self.rng.random();
            let p: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + t * (v - u)).collect();
            let q = self.jitter(&p);
            self.rows.push(q);
            self.labels.push(label);
        }
        self.skeleton.push([a.to_vec(), b.to_vec()]);
    }

    fn uniform_box(&mut self, lo: &[f64], hi: &[f64], count: usize) {
        for _ in 0..count {
            let p = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * self.rng.random::<f64>())
                .collect();
            self.rows.push(p);
            self.labels.push(NOISE);
        }
    }

    fn finish(self) -> Result<Synthetic> {
        Ok(Synthetic {
            cloud: PointCloud::from_rows(&self.rows)?,
            labels: self.labels,
            skeleton: self.skeleton,
        })
    }
}

fn arm_end(angle: f64, length: f64) -> Vec<f64> {
    vec![length * angle.cos(), length * angle.sin()]
}

/// Points along a straight segment in `dim` dimensions.
pub fn line(count: usize, dim: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let a = vec![0.0; dim];
    let end: Vec<f64> = (0..dim).map(|k| if k == 0 { 1.0 } else { 0.5 / k as f64 }).collect();
    b.segment(&a, &end, count, 0);
    b.finish()
}

/// Three unit arms at 120° from the origin, `per_arm` points each.
pub fn three_arm_star(per_arm: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let origin = [0.0, 0.0];
    for k in 0..3 {
        let end = arm_end(PI / 2.0 + k as f64 * TAU / 3.0, 1.0);
        b.segment(&origin, &end, per_arm, k);
    }
    b.finish()
}

/// The star with `ratio · 3 · per_arm` extra points uniform over `[-1.5, 1.5]²`.
pub fn star_with_background(per_arm: usize, sdev: f64, ratio: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let origin = [0.0, 0.0];
    for k in 0..3 {
        let end = arm_end(PI / 2.0 + k as f64 * TAU / 3.0, 1.0);
        b.segment(&origin, &end, per_arm, k);
    }
    let noise = (ratio * 3.0 * per_arm as f64).round() as usize;
    b.uniform_box(&[-1.5, -1.5], &[1.5, 1.5], noise);
    b.finish()
}

/// Three unit arms in three dimensions from the origin, along directions
/// that do not share a plane.
pub fn tripod(per_arm: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let origin = [0.0, 0.0, 0.0];
    let dirs = [[1.0, 0.0, 0.0], [-0.5, 0.8, 0.3], [-0.5, -0.6, 0.6]];
    for (k, d) in dirs.iter().enumerate() {
        let len = d.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        let end: Vec<f64> = d.iter().map(|v| v / len).collect();
        b.segment(&origin, &end, per_arm, k);
    }
    b.finish()
}

/// Points around a circle of the given radius, with Gaussian noise.
pub fn circle(count: usize, radius: f64, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    for _ in 0..count {
        let t = TAU * b.rng.random::<f64>();
        let p = b.jitter(&[radius * t.cos(), radius * t.sin()]);
        b.rows.push(p);
        b.labels.push(0);
    }
    b.finish()
}

/// A thick half-ring: angle uniform in `[0, π]`, radius uniform in
/// `[1 - width/2, 1 + width/2]`.
pub fn thick_turn(count: usize, width: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, 0.0);
    for _ in 0..count {
        let t = PI * b.rng.random::<f64>();
        let r = 1.0 + width * (b.rng.random::<f64>() - 0.5);
        b.rows.push(vec![r * t.cos(), r * t.sin()]);
        b.labels.push(0);
    }
    b.finish()
}

/// Three straight threads of length 2 through a common central region, at
/// 0°, 60° and 120°, slightly offset so they do not share one point.
pub fn crossing_threads(per_thread: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let offsets = [[0.0, -0.15], [0.1, 0.08], [-0.1, 0.08]];
    for (k, off) in offsets.iter().enumerate() {
        let angle = k as f64 * PI / 3.0;
        let (c, s) = (angle.cos(), angle.sin());
        let a = [off[0] - c, off[1] - s];
        let e = [off[0] + c, off[1] + s];
        b.segment(&a, &e, per_thread, k);
    }
    b.finish()
}

/// Two parallel segments `gap` apart.
pub fn parallel_segments(per_segment: usize, gap: f64, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    b.segment(&[0.0, 0.0], &[1.0, 0.0], per_segment, 0);
    b.segment(&[0.0, gap], &[1.0, gap], per_segment, 1);
    b.finish()
}

/// A tree in ten dimensions: a trunk along the first axis, a side branch
/// along the second and a short branch along the third. The third branch
/// carries too little variance to appear among the two leading principal
/// components.
pub fn ten_dim_tree(per_branch: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let at = |coords: &[(usize, f64)]| {
        let mut p = vec![0.0; 10];
        for &(k, v) in coords {
            p[k] = v;
        }
        p
    };
    b.segment(&at(&[(0, -3.0)]), &at(&[(0, 3.0)]), 2 * per_branch, 0);
    b.segment(&at(&[(0, -1.0)]), &at(&[(0, -1.0), (1, 2.0)]), per_branch, 1);
    b.segment(&at(&[(0, 1.5)]), &at(&[(0, 1.5), (2, 1.2)]), per_branch, 2);
    b.finish()
}

/// Appends Gaussian noise coordinates until the data has `dims` columns.
/// Skeleton endpoints are padded with zeros. Extra columns are never removed.
pub fn pad_dimensions(data: Synthetic, dims: usize, sdev: f64, seed: u64) -> Result<Synthetic> {
    let mut b = Builder::new(seed, sdev);
    let zeros = vec![0.0; dims.saturating_sub(data.cloud.dim())];
    let rows: Vec<Vec<f64>> = data
        .cloud
        .points()
        .map(|p| {
            let mut row = p.to_vec();
            row.extend(b.jitter(&zeros));
            row
        })
        .collect();
    let skeleton = data
        .skeleton
        .into_iter()
        .map(|[mut a, mut e]| {
            a.extend(&zeros);
            e.extend(&zeros);
            [a, e]
        })
        .collect();
    Ok(Synthetic {
        cloud: PointCloud::from_rows(&rows)?,
        labels: data.labels,
        skeleton,
    })
}

/// Distance from `p` to the nearest skeleton segment.
pub fn distance_to_skeleton(p: &[f64], skeleton: &[[Vec<f64>; 2]]) -> f64 {
    skeleton
        .iter()
        .map(|[a, b]| {
            let mut dot = 0.0;
            let mut len2 = 0.0;
            for ((x, u), v) in p.iter().zip(a).zip(b) {
                dot += (x - u) * (v - u);
                len2 += (v - u) * (v - u);
            }
            let t = if len2 > 0.0 { (dot / len2).clamp(0.0, 1.0) } else { 0.0 };
            p.iter()
                .zip(a)
                .zip(b)
                .map(|((x, u), v)| (x - u - t * (v - u)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}
