//! Plain CSV ingestion and export.
//!
//! * edges: one `src,dst` pair of node ids per line
//! * features: one comma-separated row of reals per node, node `i` on row `i`
//! * targets: one real per line
//!
//! No header by default; with `header = true` the first line of each file is
//! skipped on read and a header line is written on export.

use std::fs::File;
use std::path::Path;

use super::dataset::{Dataset, Masks};
use super::split::{split, SplitSpec};
use super::Graph;
use crate::diff::Tensor;
use crate::error::{Error, Result};

fn reader(path: &Path, header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| ingest(path, format!("cannot open: {e}")))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn ingest(path: &Path, message: String) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        message,
    }
}

/// Read rows of parsed fields, reporting the 1-based line of any failure.
fn read_rows<T, F>(path: &Path, header: bool, mut parse: F) -> Result<Vec<(u64, Vec<T>)>>
where
    F: FnMut(&str) -> std::result::Result<T, String>,
{
    let mut rdr = reader(path, header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ingest(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields = rec
            .iter()
            .map(|f| parse(f).map_err(|m| ingest(path, format!("line {line}: {m}"))))
            .collect::<Result<Vec<T>>>()?;
        out.push((line, fields));
    }
    Ok(out)
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .map_err(|_| format!("'{s}' is not a number"))
        .and_then(|x| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("'{s}' is not finite"))
            }
        })
}

/// Load a dataset; masks come from the default random split with seed 0.
pub fn load_csv(edges: &Path, features: &Path, targets: &Path, header: bool) -> Result<Dataset> {
    load_csv_with_split(edges, features, targets, header, &SplitSpec::random_default(0))
}

pub fn load_csv_with_split(
    edges: &Path,
    features: &Path,
    targets: &Path,
    header: bool,
    split_spec: &SplitSpec,
) -> Result<Dataset> {
    let target_rows = read_rows(targets, header, parse_real)?;
    let mut y = Vec::with_capacity(target_rows.len());
    for (line, row) in target_rows {
        if row.len() != 1 {
            return Err(ingest(
                targets,
                format!("line {line}: expected 1 value, found {}", row.len()),
            ));
        }
        y.push(row[0]);
    }
    let n = y.len();

    let feat_rows = read_rows(features, header, parse_real)?;
    if feat_rows.len() != n {
        return Err(ingest(
            features,
            format!("{} feature rows for {n} targets", feat_rows.len()),
        ));
    }
    let d = feat_rows.first().map_or(0, |(_, r)| r.len());
    let mut x = Vec::with_capacity(n * d);
    for (line, row) in feat_rows {
        if row.len() != d {
            return Err(ingest(
                features,
                format!("line {line}: ragged row with {} values, expected {d}", row.len()),
            ));
        }
        x.extend(row);
    }
    let x = Tensor::from_vec(n, d, x)?;

    let edge_rows = read_rows(edges, header, |s| {
        s.parse::<usize>()
            .map_err(|_| format!("'{s}' is not a node index"))
    })?;
    let mut pairs = Vec::with_capacity(edge_rows.len());
    for (line, row) in edge_rows {
        if row.len() != 2 {
            return Err(ingest(
                edges,
                format!("line {line}: expected src,dst, found {} fields", row.len()),
            ));
        }
        for &v in &row {
            if v >= n {
                return Err(ingest(
                    edges,
                    format!("line {line}: dangling node index {v} (only {n} nodes)"),
                ));
            }
        }
        pairs.push((row[0], row[1]));
    }
    let graph = Graph::from_edges(n, pairs)?;
    let masks: Masks = split(&graph, split_spec)?;
    Dataset::new(graph, x, y, masks)
}

/// Write the three files read by [`load_csv`].
pub fn export_csv(ds: &Dataset, edges: &Path, features: &Path, targets: &Path, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(edges)?;
    if header {
        w.write_record(["src", "dst"])?;
    }
    for (u, v) in ds.graph.edges() {
        w.write_record([u.to_string(), v.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(features)?;
    if header {
        w.write_record((0..ds.feat_dim()).map(|j| format!("x{j}")))?;
    }
    for r in 0..ds.num_nodes() {
        w.write_record(ds.features.row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(targets)?;
    if header {
        w.write_record(["y"])?;
    }
    for y in &ds.targets {
        w.write_record([y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
