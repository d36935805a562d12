use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::split::{split, SplitSpec};
use super::Graph;
use crate::diff::Tensor;
use crate::error::{param_err, shape_err, Result};
use crate::rng;

/// Which node subset a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Train,
    Val,
    Test,
}

impl MaskKind {
    pub const ALL: [MaskKind; 3] = [MaskKind::Train, MaskKind::Val, MaskKind::Test];

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Train => "train",
            MaskKind::Val => "val",
            MaskKind::Test => "test",
        }
    }
}

/// Disjoint, exhaustive train/val/test node masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn get(&self, kind: MaskKind) -> &[bool] {
        match kind {
            MaskKind::Train => &self.train,
            MaskKind::Val => &self.val,
            MaskKind::Test => &self.test,
        }
    }

    /// Node ids in the mask, ascending.
    pub fn indices(&self, kind: MaskKind) -> Vec<usize> {
        mask_indices(self.get(kind))
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (count(&self.train), count(&self.val), count(&self.test))
    }

    /// Every node belongs to exactly one mask.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return shape_err("mask length differs from node count");
        }
        for v in 0..n {
            let hits = self.train[v] as u8 + self.val[v] as u8 + self.test[v] as u8;
            if hits != 1 {
                return param_err(format!("node {v} is in {hits} masks"));
            }
        }
        Ok(())
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Graph, node features, scalar targets and a node split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Tensor,
    pub targets: Vec<f64>,
    pub masks: Masks,
}

impl Dataset {
    pub fn new(graph: Graph, features: Tensor, targets: Vec<f64>, masks: Masks) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n || targets.len() != n {
            return shape_err(format!(
                "graph has {n} nodes, features {} rows, targets {}",
                features.rows(),
                targets.len()
            ));
        }
        masks.validate(n)?;
        Ok(Dataset {
            graph,
            features,
            targets,
            masks,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    /// Same data under a different split.
    pub fn with_split(&self, spec: &SplitSpec) -> Result<Self> {
        let masks = split(&self.graph, spec)?;
        Ok(Dataset {
            masks,
            ..self.clone()
        })
    }

    /// Same data with every node in the test mask (used for transfer evaluation).
    pub fn all_test(&self) -> Self {
        let n = self.num_nodes();
        Dataset {
            masks: Masks {
                train: vec![false; n],
                val: vec![false; n],
                test: vec![true; n],
            },
            ..self.clone()
        }
    }
}

/// Feature distribution / target rule of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    /// Gaussian features standardized per column.
    Basic,
    Gaussian,
    /// Uniform(-1, 1) features.
    Uniform,
    /// Gaussian features; the neighbor term is scaled by `deg(v) / max_deg`.
    EdgeWeighted,
}

impl FeatureFamily {
    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::Basic => "basic",
            FeatureFamily::Gaussian => "gaussian",
            FeatureFamily::Uniform => "uniform",
            FeatureFamily::EdgeWeighted => "edge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(FeatureFamily::Basic),
            "gaussian" => Ok(FeatureFamily::Gaussian),
            "uniform" => Ok(FeatureFamily::Uniform),
            "edge" | "edge_weighted" => Ok(FeatureFamily::EdgeWeighted),
            other => param_err(format!("unknown feature family '{other}'")),
        }
    }
}

/// Row `v` = mean of the rows of `v`'s neighbors; zero for isolated nodes.
pub fn neighbor_mean(graph: &Graph, x: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for v in 0..graph.num_nodes() {
        let nb = graph.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        let inv = 1.0 / nb.len() as f64;
        let row = out.row_mut(v);
        for &u in nb {
            for (o, &xu) in row.iter_mut().zip(x.row(u)) {
                *o += xu;
            }
        }
        row.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

/// Generate features and targets on `graph`.
///
/// Targets follow `y_v = w.x_v + 0.5 * s_v * w.mean(x_u, u in N(v)) + eps_v`
/// with `w ~ N(0, 1/d)` drawn from the seed, `eps_v ~ N(0, noise_sigma^2)` and
/// `s_v = 1` except for [`FeatureFamily::EdgeWeighted`]. The split is the
/// default random (0.6, 0.2, 0.2) split under the same seed.
pub fn synth_dataset(
    graph: &Graph,
    family: FeatureFamily,
    feat_dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if feat_dim == 0 {
        return param_err("feat_dim must be at least 1");
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return param_err(format!("noise_sigma = {noise_sigma} must be non-negative"));
    }
    let n = graph.num_nodes();

    let mut frng = rng::stream(seed, "features", 0);
    let mut features = Tensor::zeros(n, feat_dim);
    for x in features.data_mut() {
        *x = match family {
            FeatureFamily::Uniform => frng.random_range(-1.0..1.0),
            _ => frng.sample(StandardNormal),
        };
    }
    if family == FeatureFamily::Basic {
        standardize_columns(&mut features);
    }

    let mut wrng = rng::stream(seed, "target-weights", 0);
    let scale = 1.0 / (feat_dim as f64).sqrt();
    let w: Vec<f64> = (0..feat_dim)
        .map(|_| scale * wrng.sample::<f64, _>(StandardNormal))
        .collect();
    let dot = |row: &[f64]| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();

    let agg = neighbor_mean(graph, &features);
    let max_deg = graph.max_degree().max(1) as f64;
    let mut nrng = rng::stream(seed, "target-noise", 0);
    let targets = (0..n)
        .map(|v| {
            let s = match family {
                FeatureFamily::EdgeWeighted => graph.degree(v) as f64 / max_deg,
                _ => 1.0,
            };
            let eps: f64 = nrng.sample(StandardNormal);
            dot(features.row(v)) + 0.5 * s * dot(agg.row(v)) + noise_sigma * eps
        })
        .collect();

    let masks = split(graph, &SplitSpec::random_default(seed))?;
    Dataset::new(graph.clone(), features, targets, masks)
}

fn standardize_columns(x: &mut Tensor) {
    let (n, d) = x.shape();
    if n < 2 {
        return;
    }
    for c in 0..d {
        let col = x.col(c);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for r in 0..n {
            let v = x.get(r, c) - mean;
            x.set(r, c, if sd > 0.0 { v / sd } else { v });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    FeatureNoise,
    TargetNoise,
    EdgeDropout,
}

impl PerturbKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::FeatureNoise => "feature_noise",
            PerturbKind::TargetNoise => "target_noise",
            PerturbKind::EdgeDropout => "edge_dropout",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "feature_noise" | "feature" => Ok(PerturbKind::FeatureNoise),
            "target_noise" | "target" => Ok(PerturbKind::TargetNoise),
            "edge_dropout" | "edge" => Ok(PerturbKind::EdgeDropout),
            other => param_err(format!("unknown perturbation '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    /// Noise standard deviation, or edge drop probability.
    pub level: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return param_err(format!("perturbation level {} must be non-negative", self.level));
        }
        if self.kind == PerturbKind::EdgeDropout && self.level > 1.0 {
            return param_err(format!("edge drop probability {} exceeds 1", self.level));
        }
        Ok(())
    }
}

/// Apply a perturbation; masks are left unchanged.
///
/// Edge dropout visits undirected edges in CSR order (`u < v`) and draws one
/// uniform per edge from stream `(seed, "edge-dropout", 0)`; the edge survives
/// when the draw is at least `level`.
pub fn perturb(ds: &Dataset, spec: &PerturbSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.level == 0.0 {
        return Ok(ds.clone());
    }
    let mut out = ds.clone();
    match spec.kind {
        PerturbKind::FeatureNoise => {
            let mut rng = rng::stream(spec.seed, "feature-noise", 0);
            for x in out.features.data_mut() {
                *x += spec.level * rng.sample::<f64, _>(StandardNormal);
            }
        }
        PerturbKind::TargetNoise => {
            let mut rng = rng::stream(spec.seed, "target-noise-perturb", 0);
            for y in out.targets.iter_mut() {
                *y += spec.level * rng.sample::<f64, _>(StandardNormal);
            }
        }
        PerturbKind::EdgeDropout => {
            let mut rng = rng::stream(spec.seed, "edge-dropout", 0);
            let kept: Vec<(usize, usize)> = ds
                .graph
                .edges()
                .filter(|_| rng.random::<f64>() >= spec.level)
                .collect();
            out.graph = Graph::from_edges(ds.num_nodes(), kept)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_chain, gen_er};

    #[test]
    fn isolated_node_target_is_own_term() {
        let g = Graph::empty(10);
        let ds = synth_dataset(&g, FeatureFamily::Gaussian, 4, 0.0, 5).unwrap();
        let mut wrng = rng::stream(5, "target-weights", 0);
        let w: Vec<f64> = (0..4)
            .map(|_| 0.5 * wrng.sample::<f64, _>(StandardNormal))
            .collect();
        for v in 0..10 {
            let own: f64 = ds.features.row(v).iter().zip(&w).map(|(a, b)| a * b).sum();
            assert_eq!(ds.targets[v], own);
        }
    }

    #[test]
    fn gaussian_columns_are_centered() {
        let g = gen_er(1000, 0.005, 1).unwrap();
        let ds = synth_dataset(&g, FeatureFamily::Gaussian, 5, 1.0, 2).unwrap();
        for c in 0..5 {
            let m = ds.features.col(c).iter().sum::<f64>() / 1000.0;
            assert!(m.abs() < 0.15, "column {c} mean {m}");
        }
    }

    #[test]
    fn basic_family_is_standardized() {
        let g = gen_chain(200).unwrap();
        let ds = synth_dataset(&g, FeatureFamily::Basic, 3, 0.5, 9).unwrap();
        for c in 0..3 {
            let col = ds.features.col(c);
            let m = col.iter().sum::<f64>() / 200.0;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 200.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let g = gen_er(60, 0.1, 3).unwrap();
        for fam in [
            FeatureFamily::Basic,
            FeatureFamily::Gaussian,
            FeatureFamily::Uniform,
            FeatureFamily::EdgeWeighted,
        ] {
            let a = synth_dataset(&g, fam, 4, 0.3, 8).unwrap();
            let b = synth_dataset(&g, fam, 4, 0.3, 8).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn perturb_extremes() {
        let g = gen_er(50, 0.2, 3).unwrap();
        let ds = synth_dataset(&g, FeatureFamily::Gaussian, 3, 0.1, 1).unwrap();
        for kind in [
            PerturbKind::FeatureNoise,
            PerturbKind::TargetNoise,
            PerturbKind::EdgeDropout,
        ] {
            let spec = PerturbSpec { kind, level: 0.0, seed: 4 };
            assert_eq!(perturb(&ds, &spec).unwrap(), ds);
        }
        let all = PerturbSpec {
            kind: PerturbKind::EdgeDropout,
            level: 1.0,
            seed: 4,
        };
        let out = perturb(&ds, &all).unwrap();
        assert_eq!(out.graph.num_edges(), 0);
        assert_eq!(out.masks, ds.masks);
        assert!(perturb(&ds, &PerturbSpec { level: 1.5, ..all }).is_err());
    }

    #[test]
    fn edge_dropout_matches_bernoulli_oracle() {
        // ~1000 undirected edges
        let g = gen_er(200, 0.05, 12).unwrap();
        let ds = synth_dataset(&g, FeatureFamily::Gaussian, 2, 0.0, 1).unwrap();
        let mut oracle = rng::stream(77, "edge-dropout", 0);
        let expected = (0..g.num_edges())
            .filter(|_| oracle.random::<f64>() >= 0.2)
            .count();
        let spec = PerturbSpec {
            kind: PerturbKind::EdgeDropout,
            level: 0.2,
            seed: 77,
        };
        let out = perturb(&ds, &spec).unwrap();
        assert_eq!(out.graph.num_edges(), expected);
        out.graph.validate().unwrap();
    }

    #[test]
    fn noise_changes_only_its_target() {
        let g = gen_er(30, 0.2, 3).unwrap();
        let ds = synth_dataset(&g, FeatureFamily::Uniform, 3, 0.1, 1).unwrap();
        let spec = PerturbSpec {
            kind: PerturbKind::TargetNoise,
            level: 0.3,
            seed: 2,
        };
        let out = perturb(&ds, &spec).unwrap();
        assert_eq!(out.features, ds.features);
        assert_ne!(out.targets, ds.targets);
    }
}
