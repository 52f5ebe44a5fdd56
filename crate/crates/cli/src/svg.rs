//! Static SVG scatter plots with graphs drawn over the data.

use std::fmt::Write;

use principal_graph::init::principal_axes;
use principal_graph::{ElasticGraph, NodeEmbedding, PointCloud};

use crate::error::{AtStage, CliError, CliResult};

/// How points are mapped to the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Coordinates(usize, usize),
    Principal(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    /// Ensemble members and other background graphs.
    Thin,
    /// The reference graph.
    Thick,
}

pub struct Layer<'a> {
    pub graph: &'a ElasticGraph,
    pub embedding: &'a NodeEmbedding,
    pub stroke: Stroke,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// `v` rounded to six significant digits, in the shortest form that reads
/// back as the rounded value.
pub fn sig6(v: f64) -> String {
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{}", rounded + 0.0)
}

type Pick = Box<dyn Fn(&[f64]) -> [f64; 2]>;

struct Mapper {
    pick: Pick,
    lo: [f64; 2],
    scale: f64,
    margin: f64,
    size: f64,
}

impl Mapper {
    fn place(&self, p: &[f64]) -> (String, String) {
        let [x, y] = (self.pick)(p);
        let sx = self.margin + (x - self.lo[0]) * self.scale;
        let sy = self.size - self.margin - (y - self.lo[1]) * self.scale;
        (sig6(sx), sig6(sy))
    }
}

fn mapper(cloud: &PointCloud, projection: Projection, size: f64) -> CliResult<Mapper> {
    if cloud.dim() < 2 {
        return Err(CliError::data(
            "render",
            format!("need at least 2 dimensions, data has {}", cloud.dim()),
        ));
    }
    let pick: Pick = match projection {
        Projection::Coordinates(i, j) => {
            if i.max(j) >= cloud.dim() {
                return Err(CliError::config(
                    "render",
                    format!("coordinates ({i}, {j}) out of range for {} dimensions", cloud.dim()),
                ));
            }
            Box::new(move |p| [p[i], p[j]])
        }
        Projection::Principal(i, j) => {
            if i.max(j) >= cloud.dim() {
                return Err(CliError::config(
                    "render",
                    format!("components ({i}, {j}) out of range for {} dimensions", cloud.dim()),
                ));
            }
            let axes = principal_axes(cloud, i.max(j) + 1).at("render")?;
            Box::new(move |p| {
                let v = axes.project(p, &[i, j]);
                [v[0], v[1]]
            })
        }
    };
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in cloud.points() {
        let q = pick(p);
        for k in 0..2 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let margin = 0.05 * size;
    let scale = if span > 0.0 { (size - 2.0 * margin) / span } else { 1.0 };
    Ok(Mapper {
        pick,
        lo,
        scale,
        margin,
        size,
    })
}

/// Draws the points (coloured by label when given) and every layer's edges
/// and nodes. Output depends only on the inputs.
pub fn render_svg(
    cloud: &PointCloud,
    labels: Option<&[Option<usize>]>,
    layers: &[Layer<'_>],
    projection: Projection,
    size: f64,
) -> CliResult<String> {
    let map = mapper(cloud, projection, size)?;
    let mut out = String::new();
    let sz = sig6(size);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{sz}" height="{sz}" viewBox="0 0 {sz} {sz}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<g class="points">"#).unwrap();
    for (i, p) in cloud.points().enumerate() {
        let (x, y) = map.place(p);
        let colour = match labels.and_then(|l| l[i]) {
            Some(l) => PALETTE[l % PALETTE.len()],
            None => "#999999",
        };
        writeln!(
            out,
            r#"<circle class="point" cx="{x}" cy="{y}" r="1.5" fill="{colour}" fill-opacity="0.6"/>"#
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    for layer in layers {
        let (width, radius, opacity) = match layer.stroke {
            Stroke::Thin => ("0.6", "1.5", "0.35"),
            Stroke::Thick => ("2.5", "4", "1"),
        };
        writeln!(
            out,
            r#"<g class="graph" stroke="black" stroke-width="{width}" stroke-opacity="{opacity}">"#
        )
        .unwrap();
        for &[a, b] in layer.graph.edges() {
            let (x1, y1) = map.place(layer.embedding.row(a));
            let (x2, y2) = map.place(layer.embedding.row(b));
            writeln!(out, r#"<line class="edge" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>"#).unwrap();
        }
        for v in 0..layer.graph.node_count() {
            let (x, y) = map.place(layer.embedding.row(v));
            writeln!(
                out,
                r#"<circle class="node" cx="{x}" cy="{y}" r="{radius}" fill="black" fill-opacity="{opacity}"/>"#
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(40.0), "40");
        assert_eq!(sig6(-0.0), "0");
    }

    fn count(svg: &str, class: &str) -> usize {
        svg.matches(&format!(r#"class="{class}""#)).count()
    }

    #[test]
    fn element_counts() {
        let cloud = PointCloud::new(4, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let g = ElasticGraph::path(3, 0.1, 0.1).unwrap();
        let e = NodeEmbedding::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]]).unwrap();
        let layer = Layer {
            graph: &g,
            embedding: &e,
            stroke: Stroke::Thick,
        };
        let svg = render_svg(&cloud, None, &[layer], Projection::Coordinates(0, 1), 100.0).unwrap();
        assert_eq!(count(&svg, "point"), 4);
        assert_eq!(count(&svg, "edge"), 2);
        assert_eq!(count(&svg, "node"), 3);
        let bare = render_svg(&cloud, None, &[], Projection::Coordinates(0, 1), 100.0).unwrap();
        assert_eq!(count(&bare, "edge"), 0);
        assert_eq!(count(&bare, "point"), 4);
    }

    #[test]
    fn principal_projection_uses_the_requested_pair() {
        // Variance is largest along axis 2, then axis 0; axis 1 is constant.
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 4) as f64, 5.0, i as f64]).collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let a = render_svg(&cloud, None, &[], Projection::Principal(0, 1), 100.0).unwrap();
        let b = render_svg(&cloud, None, &[], Projection::Coordinates(2, 0), 100.0).unwrap();
        let c = render_svg(&cloud, None, &[], Projection::Coordinates(0, 2), 100.0).unwrap();
        assert_ne!(a, c);
        let xs = |s: &str| -> Vec<f64> {
            s.split("cx=\"")
                .skip(1)
                .map(|t| t.split('"').next().unwrap().parse().unwrap())
                .collect()
        };
        // The first component is the third coordinate up to sign and centring.
        let (xa, xb) = (xs(&a), xs(&b));
        let corr = xa.iter().zip(&xb).map(|(p, q)| (p - 50.0) * (q - 50.0)).sum::<f64>();
        assert!(corr.abs() > 0.0);
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        assert!((spread(&xa) - spread(&xb)).abs() < 1.0);
        let one_d = PointCloud::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(render_svg(&one_d, None, &[], Projection::Coordinates(0, 1), 100.0).is_err());
    }
}
