//! Width-penalty sweeps and bounded scalar search.

use serde::{Deserialize, Serialize};

use super::parallel::run_all;
use super::train::{train_qpignn, TrainConfig};
use crate::error::{param_err, Result};
use crate::graph::Dataset;
use crate::metrics::MetricsReport;

/// Grid used by the trade-off sweep.
pub const DEFAULT_GRID: [f64; 6] = [0.05, 0.1, 0.3, 0.5, 0.8, 1.2];
pub const DEFAULT_BOUNDS: (f64, f64) = (0.01, 1.0);
pub const DEFAULT_BUDGET: usize = 9;
/// Weight of the under-coverage penalty in the selection objective.
pub const COVERAGE_PENALTY: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by lambda.
    pub entries: Vec<SweepEntry>,
    pub chosen_lambda: f64,
    pub chosen_objective: f64,
}

impl SweepResult {
    pub fn chosen(&self) -> &SweepEntry {
        self.entries
            .iter()
            .find(|e| e.lambda == self.chosen_lambda)
            .expect("chosen lambda is always one of the entries")
    }

    pub fn entry(&self, lambda: f64) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| (e.lambda - lambda).abs() < 1e-12)
    }

    /// Grid neighbours where the narrower-penalty run is not at least as wide.
    pub fn width_inversions(&self) -> Vec<(f64, f64)> {
        self.entries
            .windows(2)
            .filter(|w| w[0].test.mpiw < w[1].test.mpiw)
            .map(|w| (w[0].lambda, w[1].lambda))
            .collect()
    }

    fn from_entries(mut entries: Vec<SweepEntry>) -> Self {
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        entries.dedup_by(|a, b| a.lambda == b.lambda);
        let best = entries
            .iter()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
            .expect("non-empty");
        SweepResult {
            chosen_lambda: best.lambda,
            chosen_objective: best.objective,
            entries,
        }
    }
}

/// `val_MPIW + 20 * max(0, (1 - alpha) - val_PICP)`.
///
/// The weight must exceed the width cost of extra coverage near the target,
/// which for Gaussian residuals is `sigma / phi(z)` (about 9.7 sigma at 90%),
/// or the objective is flat around the target and drifts below it.
pub fn selection_objective(val: &MetricsReport) -> f64 {
    val.mpiw + COVERAGE_PENALTY * ((1.0 - val.alpha) - val.picp).max(0.0)
}

fn evaluate_lambdas(ds: &Dataset, cfg: &TrainConfig, lambdas: &[f64], jobs: usize) -> Result<Vec<SweepEntry>> {
    run_all(jobs, lambdas, |&lambda| {
        let run_cfg = TrainConfig {
            lambda_width: lambda,
            ..*cfg
        };
        let (_, rec) = train_qpignn(ds, &run_cfg)?;
        Ok(SweepEntry {
            lambda,
            val: rec.metrics.val,
            test: rec.metrics.test,
            objective: selection_objective(&rec.metrics.val),
        })
    })
}

/// Train one model per grid value.
pub fn lambda_sweep(ds: &Dataset, cfg: &TrainConfig, grid: &[f64], jobs: usize) -> Result<SweepResult> {
    if grid.is_empty() {
        return param_err("lambda grid is empty");
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return param_err(format!("lambda {bad} must be non-negative"));
    }
    Ok(SweepResult::from_entries(evaluate_lambdas(ds, cfg, grid, jobs)?))
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Coarse geometric grid of five points inside `bounds`, then two rounds of
/// trisection (in log space) of the bracket around the current best, all
/// within `budget` trainings.
pub fn lambda_tune(ds: &Dataset, cfg: &TrainConfig, bounds: (f64, f64), budget: usize, jobs: usize) -> Result<SweepResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return param_err(format!("tuning bounds ({lo}, {hi}) must satisfy 0 < lo < hi"));
    }
    if budget < 3 {
        return param_err(format!("tuning budget {budget} must be at least 3"));
    }
    let coarse = geometric(lo, hi, budget.min(5));
    let mut entries = evaluate_lambdas(ds, cfg, &coarse, jobs)?;
    for _round in 0..2 {
        let remaining = budget - entries.len();
        if remaining == 0 {
            break;
        }
        let current = SweepResult::from_entries(entries.clone());
        let lams: Vec<f64> = current.entries.iter().map(|e| e.lambda).collect();
        let i = lams.iter().position(|&l| l == current.chosen_lambda).unwrap_or(0);
        let left = if i > 0 { lams[i - 1] } else { lo };
        let right = if i + 1 < lams.len() { lams[i + 1] } else { hi };
        let (a, b) = (left.ln(), right.ln());
        let probes: Vec<f64> = [1.0 / 3.0, 2.0 / 3.0]
            .iter()
            .map(|t| (a + (b - a) * t).exp())
            .filter(|p| !lams.iter().any(|l| (l - p).abs() < 1e-12))
            .take(remaining)
            .collect();
        if probes.is_empty() {
            break;
        }
        entries.extend(evaluate_lambdas(ds, cfg, &probes, jobs)?);
    }
    Ok(SweepResult::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(picp: f64, mpiw: f64) -> MetricsReport {
        MetricsReport {
            picp,
            mpiw,
            nmpiw: 0.0,
            mpe: 0.0,
            sharpness: 0.0,
            winkler: 0.0,
            cwc: 0.0,
            n_eval: 10,
            alpha: 0.1,
        }
    }

    fn entry(lambda: f64, picp: f64, mpiw: f64) -> SweepEntry {
        let val = report(picp, mpiw);
        SweepEntry {
            lambda,
            val,
            test: val,
            objective: selection_objective(&val),
        }
    }

    #[test]
    fn narrower_covering_interval_wins() {
        let r = SweepResult::from_entries(vec![entry(0.1, 0.93, 1.2), entry(0.5, 0.91, 0.8)]);
        assert_eq!(r.chosen_lambda, 0.5);
        assert!((r.chosen_objective - 0.8).abs() < 1e-12);
    }

    #[test]
    fn under_coverage_is_penalized() {
        let v = report(0.8, 1.0);
        assert!((selection_objective(&v) - 3.0).abs() < 1e-12);
        let r = SweepResult::from_entries(vec![entry(0.1, 0.9, 1.5), entry(0.5, 0.8, 1.0)]);
        assert_eq!(r.chosen_lambda, 0.1);
    }

    #[test]
    fn default_grid_contains_reference_values() {
        assert!(DEFAULT_GRID.contains(&0.5) && DEFAULT_GRID.contains(&0.1));
    }

    #[test]
    fn geometric_grid_spans_bounds() {
        let g = geometric(0.05, 1.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.05).abs() < 1e-12 && (g[4] - 1.0).abs() < 1e-12);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - g[1] / g[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn width_inversions_are_listed() {
        let r = SweepResult::from_entries(vec![entry(0.1, 0.9, 1.0), entry(0.5, 0.9, 1.5), entry(0.8, 0.9, 0.5)]);
        assert_eq!(r.width_inversions(), vec![(0.1, 0.5)]);
    }
}
