//! Ablation, robustness, structural-shift and split experiments.

use serde::{Deserialize, Serialize};

use super::parallel::run_all;
use super::train::{predict, train, LossKind, TrainConfig};
use crate::error::{param_err, Result};
use crate::graph::{perturb, synth_dataset, Dataset, FeatureFamily, GraphSpec, MaskKind, PerturbKind, PerturbSpec, SplitKind, SplitSpec};
use crate::metrics::{self, MetricsReport};
use crate::model::Variant;

/// One seed of one configuration, scored on the test mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test: MetricsReport,
    pub crossing_rate: f64,
    /// Largest minus smallest test-node width.
    pub width_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub loss_kind: LossKind,
    pub runs: Vec<SeedResult>,
    pub mean: MetricsReport,
    /// Sample standard deviation of each metric, in [`MetricsReport::FIELDS`] order.
    pub std: [f64; 7],
}

impl AblationRow {
    pub fn label(&self) -> String {
        format!("{}+{}", self.variant.name(), self.loss_kind.name())
    }
}

/// Architecture / objective pairs compared by [`ablation_suite`].
pub const ABLATION_CONFIGS: [(Variant, LossKind); 6] = [
    (Variant::DualHead, LossKind::Full),
    (Variant::DualHead, LossKind::CoverageOnly),
    (Variant::DualHead, LossKind::WidthOnly),
    (Variant::DualHead, LossKind::MseOnly),
    (Variant::FixedMargin, LossKind::Full),
    (Variant::SingleHead, LossKind::Full),
];

pub const DEFAULT_ABLATION_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn seed_result(ds: &Dataset, cfg: &TrainConfig) -> Result<SeedResult> {
    let (model, rec) = train(ds, cfg)?;
    let iv = predict(ds, &model, cfg)?;
    let test = ds.masks.indices(MaskKind::Test);
    let widths = test.iter().map(|&v| iv.width(v));
    let (lo, hi) = widths.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w), b.max(w)));
    Ok(SeedResult {
        seed: cfg.seed,
        test: rec.metrics.test,
        crossing_rate: rec.test_crossing_rate,
        width_spread: hi - lo,
    })
}

/// Every entry of `configs` trained once per seed on `ds`, reported as mean
/// and standard deviation over seeds.
pub fn ablation_suite(
    ds: &Dataset,
    cfg: &TrainConfig,
    configs: &[(Variant, LossKind)],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return param_err("ablation needs at least one seed");
    }
    let work: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = run_all(jobs, &work, |&(c, seed)| {
        let (variant, loss_kind) = configs[c];
        let run_cfg = TrainConfig {
            model_variant: variant,
            loss_kind,
            seed,
            ..*cfg
        };
        seed_result(ds, &run_cfg)
    })?;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, &(variant, loss_kind))| {
            let runs: Vec<SeedResult> = results[c * seeds.len()..(c + 1) * seeds.len()].to_vec();
            let tests: Vec<MetricsReport> = runs.iter().map(|r| r.test).collect();
            AblationRow {
                variant,
                loss_kind,
                mean: MetricsReport::mean_of(&tests).expect("non-empty"),
                std: MetricsReport::std_of(&tests).expect("non-empty"),
                runs,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustRow {
    pub kind: PerturbKind,
    pub level: f64,
    pub test: MetricsReport,
    /// Perturbed PICP divided by clean PICP.
    pub coverage_retention: f64,
    /// Perturbed MPIW divided by clean MPIW.
    pub width_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub clean: MetricsReport,
    pub rows: Vec<RobustRow>,
}

impl RobustnessTable {
    pub fn rows_of(&self, kind: PerturbKind) -> Vec<&RobustRow> {
        self.rows.iter().filter(|r| r.kind == kind).collect()
    }
}

pub fn default_perturbation_levels() -> Vec<(PerturbKind, Vec<f64>)> {
    vec![
        (PerturbKind::FeatureNoise, vec![0.1, 0.2, 0.3]),
        (PerturbKind::TargetNoise, vec![0.1, 0.2, 0.3]),
        (PerturbKind::EdgeDropout, vec![0.1, 0.2, 0.3]),
    ]
}

/// Perturb, retrain and score each (kind, level) against a clean run.
pub fn robustness_suite(
    ds: &Dataset,
    cfg: &TrainConfig,
    levels: &[(PerturbKind, Vec<f64>)],
    jobs: usize,
) -> Result<RobustnessTable> {
    let mut work: Vec<Option<(PerturbKind, f64)>> = vec![None];
    for (kind, ls) in levels {
        work.extend(ls.iter().map(|&l| Some((*kind, l))));
    }
    let reports = run_all(jobs, &work, |item| match item {
        None => Ok(train(ds, cfg)?.1.metrics.test),
        Some((kind, level)) => {
            let spec = PerturbSpec {
                kind: *kind,
                level: *level,
                seed: cfg.seed,
            };
            let pds = perturb(ds, &spec)?;
            Ok(train(&pds, cfg)?.1.metrics.test)
        }
    })?;
    let clean = reports[0];
    let rows = work[1..]
        .iter()
        .zip(&reports[1..])
        .map(|(item, test)| {
            let (kind, level) = item.expect("perturbed entries");
            RobustRow {
                kind,
                level,
                test: *test,
                coverage_retention: test.picp / clean.picp,
                width_growth: test.mpiw / clean.mpiw,
            }
        })
        .collect();
    Ok(RobustnessTable { clean, rows })
}

/// Synthetic data drawn for every graph family of a shift experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSetup {
    pub families: Vec<String>,
    pub nodes: usize,
    pub feature_family: FeatureFamily,
    pub feat_dim: usize,
    pub noise_sigma: f64,
    pub runs: usize,
}

impl Default for ShiftSetup {
    fn default() -> Self {
        ShiftSetup {
            families: ["ba", "er", "grid", "tree", "chain"].map(String::from).to_vec(),
            nodes: 1000,
            feature_family: FeatureFamily::Gaussian,
            feat_dim: 8,
            noise_sigma: 1.0,
            runs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftCell {
    pub picp: f64,
    pub mpiw: f64,
    pub picp_std: f64,
    pub mpiw_std: f64,
}

/// `cells[i][j]`: trained on family `i`, evaluated on family `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub families: Vec<String>,
    pub cells: Vec<Vec<ShiftCell>>,
    pub runs: usize,
}

impl ShiftMatrix {
    /// Mean PICP of row `i` excluding the diagonal.
    pub fn off_diagonal_picp(&self, i: usize) -> f64 {
        let row = &self.cells[i];
        let others: Vec<f64> = (0..row.len()).filter(|&j| j != i).map(|j| row[j].picp).collect();
        others.iter().sum::<f64>() / others.len() as f64
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Train on each family and evaluate without recalibration on every family.
///
/// Run `r` uses seed `cfg.seed + r` for graphs, data and model, so every
/// family shares the same target weights within a run. The diagonal is scored
/// on the held-out test nodes; off-diagonal cells on every node of the target graph.
pub fn shift_matrix(setup: &ShiftSetup, cfg: &TrainConfig, jobs: usize) -> Result<ShiftMatrix> {
    let k = setup.families.len();
    if k < 2 {
        return param_err("shift matrix needs at least two families");
    }
    if setup.runs == 0 {
        return param_err("shift matrix needs at least one run");
    }
    let specs: Vec<GraphSpec> = setup
        .families
        .iter()
        .map(|f| GraphSpec::family_of_size(f, setup.nodes))
        .collect::<Result<_>>()?;
    let runs: Vec<usize> = (0..setup.runs).collect();
    let per_run: Vec<Vec<Vec<(f64, f64)>>> = run_all(jobs, &runs, |&r| {
        let seed = cfg.seed + r as u64;
        let datasets: Vec<Dataset> = specs
            .iter()
            .map(|s| {
                let g = s.build(seed)?;
                synth_dataset(&g, setup.feature_family, setup.feat_dim, setup.noise_sigma, seed)
            })
            .collect::<Result<_>>()?;
        let run_cfg = TrainConfig { seed, ..*cfg };
        let mut table = Vec::with_capacity(k);
        for (i, src) in datasets.iter().enumerate() {
            let (model, rec) = train(src, &run_cfg)?;
            let mut row = Vec::with_capacity(k);
            for (j, dst) in datasets.iter().enumerate() {
                if i == j {
                    row.push((rec.metrics.test.picp, rec.metrics.test.mpiw));
                } else {
                    let iv = predict(dst, &model, &run_cfg)?;
                    let all = vec![true; dst.num_nodes()];
                    row.push((
                        metrics::picp(&iv, &dst.targets, &all)?,
                        metrics::mpiw(&iv, &all)?,
                    ));
                }
            }
            table.push(row);
        }
        Ok(table)
    })?;
    let cells = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let picps: Vec<f64> = per_run.iter().map(|t| t[i][j].0).collect();
                    let mpiws: Vec<f64> = per_run.iter().map(|t| t[i][j].1).collect();
                    let (picp, picp_std) = mean_std(&picps);
                    let (mpiw, mpiw_std) = mean_std(&mpiws);
                    ShiftCell {
                        picp,
                        mpiw,
                        picp_std,
                        mpiw_std,
                    }
                })
                .collect()
        })
        .collect();
    Ok(ShiftMatrix {
        families: setup.families.clone(),
        cells,
        runs: setup.runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub kind: SplitKind,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

/// Retrain on `ds` under each split kind with the given ratios.
pub fn split_experiment(
    ds: &Dataset,
    cfg: &TrainConfig,
    kinds: &[SplitKind],
    ratios: (f64, f64, f64),
    jobs: usize,
) -> Result<Vec<SplitRow>> {
    if kinds.is_empty() {
        return param_err("split experiment needs at least one split kind");
    }
    run_all(jobs, kinds, |&kind| {
        let spec = SplitSpec {
            kind,
            ratios,
            seed: cfg.seed,
        };
        let sds = ds.with_split(&spec)?;
        let (_, rec) = train(&sds, cfg)?;
        Ok(SplitRow {
            kind,
            val: rec.metrics.val,
            test: rec.metrics.test,
        })
    })
}

/// Adjacent grid pairs (in increasing penalty order) where test PICP rises.
pub fn coverage_inversions(sweep: &super::tuning::SweepResult) -> usize {
    sweep
        .entries
        .windows(2)
        .filter(|w| w[1].test.picp > w[0].test.picp)
        .count()
}
