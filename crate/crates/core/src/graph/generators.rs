//! Synthetic graph families.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{param_err, Result};
use crate::rng;

/// Erdős–Rényi `G(n, p)`.
///
/// Unordered pairs `(i, j)`, `i < j`, are visited in lexicographic order and
/// each consumes exactly one uniform draw from stream `(seed, "er", 0)`; the
/// pair is kept when the draw is below `p`.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return param_err("gen_er: n must be at least 1");
    }
    if !(0.0..=1.0).contains(&p) {
        return param_err(format!("gen_er: p = {p} is not a probability"));
    }
    let mut rng = rng::stream(seed, "er", 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on `m + 1` nodes; every later node links to `m`
/// distinct earlier nodes drawn with probability proportional to degree.
pub fn gen_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return param_err(format!("gen_ba: need 1 <= m < n, got m = {m}, n = {n}"));
    }
    let mut rng = rng::stream(seed, "ba", 0);
    let mut edges = Vec::new();
    // Each node appears once per incident edge.
    let mut endpoints: Vec<usize> = Vec::new();
    for i in 0..=m {
        for j in (i + 1)..=m {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    for t in (m + 1)..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            let pick = endpoints[rng.random_range(0..endpoints.len())];
            targets.insert(pick);
        }
        for &u in &targets {
            edges.push((u, t));
            endpoints.push(u);
            endpoints.push(t);
        }
    }
    Graph::from_edges(n, edges)
}

/// `rows x cols` 4-neighbor lattice; node `(r, c)` has id `r * cols + c`.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return param_err("gen_grid: dimensions must be positive");
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::from_edges(rows * cols, edges)
}

/// Path graph `0 - 1 - ... - (n-1)`.
pub fn gen_chain(n: usize) -> Result<Graph> {
    if n == 0 {
        return param_err("gen_chain: n must be positive");
    }
    Graph::from_edges(n, (1..n).map(|v| (v - 1, v)))
}

/// Complete `branching`-ary tree with `depth` levels below the root,
/// stored in heap order (children of `i` are `b*i + 1 ..= b*i + b`).
pub fn gen_tree(branching: usize, depth: usize) -> Result<Graph> {
    if branching == 0 || depth == 0 {
        return param_err("gen_tree: branching and depth must be positive");
    }
    let mut n = 0usize;
    let mut level = 1usize;
    for _ in 0..=depth {
        n += level;
        level *= branching;
    }
    Graph::from_edges(n, (1..n).map(|v| ((v - 1) / branching, v)))
}

/// Declarative description of a graph to generate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Er { n: usize, p: f64 },
    Ba { n: usize, m: usize },
    Grid { rows: usize, cols: usize },
    Chain { n: usize },
    Tree { branching: usize, depth: usize },
}

impl GraphSpec {
    pub fn build(&self, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Er { n, p } => gen_er(n, p, seed),
            GraphSpec::Ba { n, m } => gen_ba(n, m, seed),
            GraphSpec::Grid { rows, cols } => gen_grid(rows, cols),
            GraphSpec::Chain { n } => gen_chain(n),
            GraphSpec::Tree { branching, depth } => gen_tree(branching, depth),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphSpec::Er { .. } => "er",
            GraphSpec::Ba { .. } => "ba",
            GraphSpec::Grid { .. } => "grid",
            GraphSpec::Chain { .. } => "chain",
            GraphSpec::Tree { .. } => "tree",
        }
    }

    /// A graph of this family with roughly `n` nodes and moderate density.
    pub fn family_of_size(family: &str, n: usize) -> Result<Self> {
        let n = n.max(2);
        Ok(match family {
            "er" => GraphSpec::Er {
                n,
                p: (8.0 / (n as f64 - 1.0)).min(1.0),
            },
            "ba" => GraphSpec::Ba { n, m: 3.min(n - 1) },
            "grid" => {
                let side = (n as f64).sqrt().round().max(1.0) as usize;
                GraphSpec::Grid {
                    rows: side,
                    cols: n.div_ceil(side),
                }
            }
            "chain" => GraphSpec::Chain { n },
            "tree" => {
                let mut depth = 1;
                while (1usize << (depth + 1)) - 1 < n {
                    depth += 1;
                }
                GraphSpec::Tree { branching: 2, depth }
            }
            other => return param_err(format!("unknown graph family '{other}'")),
        })
    }
}
