//! Delimited-text input and CSV outputs.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use principal_graph::analysis::PseudotimeTable;
use principal_graph::{EnergyBreakdown, Partition, PointCloud};

use crate::error::{CliError, CliResult};

/// A loaded data table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub cloud: PointCloud,
    /// Per-point labels from the label column, if one was configured.
    pub labels: Option<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableFormat {
    pub delimiter: u8,
    pub header: bool,
    pub weight_column: Option<usize>,
    pub label_column: Option<usize>,
}

impl Default for TableFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: false,
            weight_column: None,
            label_column: None,
        }
    }
}

/// Reads a rectangular numeric table. Errors name the 1-based line and
/// column of the offending cell.
pub fn load_matrix(path: &Path, format: &TableFormat) -> CliResult<Table> {
    let err = |m: String| CliError::data("load", format!("{}: {m}", path.display()));
    let file = File::open(path).map_err(|e| err(format!("cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut width = None;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => err(format!(
                "line {}: expected {expected_len} columns, found {len}",
                pos.as_ref().map_or(0, |p| p.line())
            )),
            _ => err(e.to_string()),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cols = record.len();
        if width.is_none() {
            for (name, col) in [("weight", format.weight_column), ("label", format.label_column)] {
                if let Some(c) = col {
                    if c >= cols {
                        return Err(CliError::config(
                            "load",
                            format!("{name} column {c} does not exist; the table has {cols} columns"),
                        ));
                    }
                }
            }
            width = Some(cols);
        }
        for (c, cell) in record.iter().enumerate() {
            let at = || format!("line {line}, column {}", c + 1);
            if Some(c) == format.label_column {
                labels.push(if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    None
                } else {
                    Some(
                        cell.parse::<usize>()
                            .map_err(|_| err(format!("{}: label '{cell}' is not a nonnegative integer", at())))?,
                    )
                });
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("{}: '{cell}' is not a number", at())))?;
            if !v.is_finite() {
                return Err(err(format!("{}: value '{cell}' is not finite", at())));
            }
            if Some(c) == format.weight_column {
                weights.push(v);
            } else {
                coords.push(v);
            }
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(err("no data rows".into()));
    };
    let dim = width - usize::from(format.weight_column.is_some()) - usize::from(format.label_column.is_some());
    if dim == 0 {
        return Err(err("no coordinate columns".into()));
    }
    let cloud = if format.weight_column.is_some() {
        PointCloud::with_weights(rows, dim, coords, weights)
    } else {
        PointCloud::new(rows, dim, coords)
    }
    .map_err(|e| err(e.to_string()))?;
    Ok(Table {
        cloud,
        labels: format.label_column.map(|_| labels),
    })
}

/// A file, or standard output when no path is given.
pub fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::data("output", format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn write_rows<I>(path: Option<&Path>, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let name = path.map_or_else(|| "standard output".to_string(), |p| p.display().to_string());
    let werr = |e: csv::Error| CliError::data("output", format!("{name}: {e}"));
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(header).map_err(werr)?;
    for row in rows {
        w.write_record(&row).map_err(werr)?;
    }
    w.flush().map_err(|e| CliError::data("output", format!("{name}: {e}")))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `point_index,node,sqdist`; trimmed points have an empty node.
pub fn write_assignments(path: Option<&Path>, partition: &Partition) -> CliResult<()> {
    let rows = partition
        .assignments()
        .iter()
        .zip(partition.nearest_sqdist())
        .enumerate()
        .map(|(i, (a, d))| vec![i.to_string(), opt(*a), d.to_string()]);
    write_rows(path, &["point_index", "node", "sqdist"], rows)
}

/// `point_index,pseudotime,on_path,edge_index,t`; off-path points have an
/// empty pseudotime.
pub fn write_pseudotime(path: Option<&Path>, table: &PseudotimeTable) -> CliResult<()> {
    let rows = table.points.iter().enumerate().map(|(i, p)| {
        vec![
            i.to_string(),
            opt(p.pseudotime),
            u8::from(p.on_path).to_string(),
            p.edge.to_string(),
            p.t.to_string(),
        ]
    });
    write_rows(path, &["point_index", "pseudotime", "on_path", "edge_index", "t"], rows)
}

/// One row per partition of the final fit.
pub fn write_trace(path: Option<&Path>, trace: &[EnergyBreakdown]) -> CliResult<()> {
    let rows = trace.iter().enumerate().map(|(i, e)| {
        vec![
            i.to_string(),
            e.mse.to_string(),
            e.u_e.to_string(),
            e.u_r.to_string(),
            e.total.to_string(),
            e.trimmed_count.to_string(),
        ]
    });
    write_rows(path, &["step", "mse", "u_e", "u_r", "total", "trimmed"], rows)
}

/// `point_index,label`; unlabelled points have an empty label.
pub fn write_labels(path: Option<&Path>, labels: &[Option<usize>]) -> CliResult<()> {
    let rows = labels.iter().enumerate().map(|(i, l)| vec![i.to_string(), opt(*l)]);
    write_rows(path, &["point_index", "label"], rows)
}

/// `strategy,nodes,points,dims,seconds`.
pub fn write_bench(path: Option<&Path>, rows: &[BenchRow]) -> CliResult<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.strategy.to_string(),
            r.nodes.to_string(),
            r.points.to_string(),
            r.dims.to_string(),
            format!("{:.6}", r.seconds),
        ]
    });
    write_rows(path, &["strategy", "nodes", "points", "dims", "seconds"], rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub strategy: &'static str,
    pub nodes: usize,
    pub points: usize,
    pub dims: usize,
    pub seconds: f64,
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    let name = path.map_or_else(|| "standard output".to_string(), |p| p.display().to_string());
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::data("output", format!("cannot write {name}: {e}")))
}
