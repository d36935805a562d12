use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Masks;
use super::Graph;
use crate::error::{param_err, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    Degree,
    Community,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Random => "random",
            SplitKind::Degree => "degree",
            SplitKind::Community => "community",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitKind::Random),
            "degree" => Ok(SplitKind::Degree),
            "community" => Ok(SplitKind::Community),
            other => param_err(format!("unknown split kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    /// (train, val, test) fractions.
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

    pub fn random_default(seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::Random,
            ratios: Self::DEFAULT_RATIOS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.ratios;
        for r in [a, b, c] {
            if !(r > 0.0 && r < 1.0) {
                return param_err(format!("split ratio {r} outside (0, 1)"));
            }
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return param_err(format!("split ratios sum to {}", a + b + c));
        }
        Ok(())
    }

    /// Target (train, val) counts for `n` nodes; test takes the rest.
    fn counts(&self, n: usize) -> Result<(usize, usize)> {
        let n_train = (n as f64 * self.ratios.0).round() as usize;
        let n_val = (n as f64 * self.ratios.1).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return param_err(format!(
                "ratios {:?} leave an empty mask for {n} nodes",
                self.ratios
            ));
        }
        Ok((n_train, n_val))
    }
}

/// Assign every node to train, val or test.
///
/// * `Random`: seeded shuffle, then cut by ratio.
/// * `Degree`: ascending by `(degree, id)`; lowest-degree nodes train,
///   highest-degree nodes test.
/// * `Community`: label-propagation communities, largest first. Communities
///   go to train whole while they fit; if train is still short, it is topped
///   up from the next community. Remaining nodes fill val then test.
pub fn split(graph: &Graph, spec: &SplitSpec) -> Result<Masks> {
    spec.validate()?;
    let n = graph.num_nodes();
    let (n_train, n_val) = spec.counts(n)?;
    let order: Vec<usize> = match spec.kind {
        SplitKind::Random => {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng::stream(spec.seed, "split", 0));
            ids
        }
        SplitKind::Degree => {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.sort_by_key(|&v| (graph.degree(v), v));
            ids
        }
        SplitKind::Community => community_order(graph, n_train),
    };
    let mut masks = Masks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    for (rank, &v) in order.iter().enumerate() {
        if rank < n_train {
            masks.train[v] = true;
        } else if rank < n_train + n_val {
            masks.val[v] = true;
        } else {
            masks.test[v] = true;
        }
    }
    Ok(masks)
}

/// Node order whose first `n_train` entries form the community-based train set.
fn community_order(graph: &Graph, n_train: usize) -> Vec<usize> {
    let labels = label_propagation(graph, 20);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(v);
    }
    let mut comms: Vec<Vec<usize>> = groups.into_values().collect();
    // size descending, then smallest member
    comms.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let mut train = Vec::with_capacity(n_train);
    let mut rest: Vec<&Vec<usize>> = Vec::new();
    for c in &comms {
        if train.len() + c.len() <= n_train {
            train.extend_from_slice(c);
        } else {
            rest.push(c);
        }
    }
    let mut tail: Vec<usize> = rest.into_iter().flatten().copied().collect();
    if train.len() < n_train {
        let need = n_train - train.len();
        train.extend(tail.drain(..need));
    }
    train.extend(tail);
    train
}

/// Synchronous label propagation.
///
/// Labels start as node ids; each round every node takes the most frequent
/// label in its closed neighborhood, ties broken toward the lowest label.
pub fn label_propagation(graph: &Graph, rounds: usize) -> Vec<usize> {
    let n = graph.num_nodes();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..rounds {
        let next: Vec<usize> = (0..n)
            .map(|v| {
                counts.clear();
                *counts.entry(labels[v]).or_default() += 1;
                for &u in graph.neighbors(v) {
                    *counts.entry(labels[u]).or_default() += 1;
                }
                let best = counts.values().copied().max().unwrap_or(0);
                counts
                    .iter()
                    .find(|(_, &c)| c == best)
                    .map(|(&l, _)| l)
                    .unwrap_or(labels[v])
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SplitKind, ratios: (f64, f64, f64)) -> SplitSpec {
        SplitSpec { kind, ratios, seed: 3 }
    }

    #[test]
    fn random_split_sizes() {
        let g = Graph::empty(10);
        let m = split(&g, &spec(SplitKind::Random, (0.6, 0.2, 0.2))).unwrap();
        assert_eq!(m.sizes(), (6, 2, 2));
        m.validate(10).unwrap();
    }

    #[test]
    fn degree_split_puts_hub_in_test() {
        let g = Graph::from_edges(10, (1..10).map(|v| (0, v))).unwrap();
        let m = split(&g, &spec(SplitKind::Degree, (0.6, 0.2, 0.2))).unwrap();
        assert!(m.test[0]);
    }

    #[test]
    fn community_split_keeps_cliques_apart() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let g = Graph::from_edges(8, edges).unwrap();
        let labels = label_propagation(&g, 20);
        assert!(labels[..4].iter().all(|&l| l == 0));
        assert!(labels[4..].iter().all(|&l| l == 4));
        let m = split(&g, &spec(SplitKind::Community, (0.5, 0.25, 0.25))).unwrap();
        for clique in [0..4, 4..8] {
            let in_train = clique.clone().any(|v| m.train[v]);
            let in_test = clique.clone().any(|v| m.test[v]);
            assert!(!(in_train && in_test));
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let g = Graph::empty(10);
        assert!(split(&g, &spec(SplitKind::Random, (0.5, 0.5, 0.0))).is_err());
        assert!(split(&g, &spec(SplitKind::Random, (0.6, 0.3, 0.3))).is_err());
        // rounds to an empty validation mask
        assert!(split(&Graph::empty(3), &spec(SplitKind::Random, (0.8, 0.1, 0.1))).is_err());
    }
}
