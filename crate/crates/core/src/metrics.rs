//! Interval quality metrics.
//!
//! Every metric is a mean over the nodes selected by a mask. `nmpiw`
//! normalizes by the target range over that same mask.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::graph::mask_indices;
use crate::model::IntervalSet;

pub use crate::losses::empirical_coverage as picp;

/// Exponential penalty scale of CWC.
pub const CWC_ETA: f64 = 10.0;
pub const CWC_GAMMA: f64 = 1.0;

fn eval_indices(iv: &IntervalSet, mask: &[bool]) -> Result<Vec<usize>> {
    if mask.len() != iv.len() {
        return Err(Error::Shape(format!("mask of length {} for {} intervals", mask.len(), iv.len())));
    }
    let idx = mask_indices(mask);
    if idx.is_empty() {
        return Err(Error::Contract("evaluation mask is empty".into()));
    }
    Ok(idx)
}

fn check_targets(iv: &IntervalSet, y: &[f64]) -> Result<()> {
    if y.len() != iv.len() {
        return Err(Error::Shape(format!("{} targets for {} intervals", y.len(), iv.len())));
    }
    Ok(())
}

fn mean(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&v| f(v)).sum::<f64>() / idx.len() as f64
}

pub fn mpiw(iv: &IntervalSet, mask: &[bool]) -> Result<f64> {
    let idx = eval_indices(iv, mask)?;
    Ok(mean(&idx, |v| iv.width(v)))
}

fn target_range(y: &[f64], idx: &[usize]) -> Result<f64> {
    let (lo, hi) = idx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(y[v]), hi.max(y[v])));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Domain("targets are constant on the evaluation mask".into()));
    }
    Ok(range)
}

/// Mean width divided by the target range on the mask.
pub fn nmpiw(iv: &IntervalSet, y: &[f64], mask: &[bool]) -> Result<f64> {
    check_targets(iv, y)?;
    let idx = eval_indices(iv, mask)?;
    let range = target_range(y, &idx)?;
    Ok(mean(&idx, |v| iv.width(v) / range))
}

/// Mean absolute distance between interval center and target.
pub fn mpe(iv: &IntervalSet, y: &[f64], mask: &[bool]) -> Result<f64> {
    check_targets(iv, y)?;
    let idx = eval_indices(iv, mask)?;
    Ok(mean(&idx, |v| (iv.center(v) - y[v]).abs()))
}

/// Mean squared width.
pub fn sharpness(iv: &IntervalSet, mask: &[bool]) -> Result<f64> {
    let idx = eval_indices(iv, mask)?;
    Ok(mean(&idx, |v| iv.width(v).powi(2)))
}

pub fn winkler(iv: &IntervalSet, y: &[f64], mask: &[bool], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_targets(iv, y)?;
    let idx = eval_indices(iv, mask)?;
    Ok(mean(&idx, |v| {
        let miss = (iv.low[v] - y[v]).max(y[v] - iv.up[v]).max(0.0);
        iv.width(v) + 2.0 / alpha * miss
    }))
}

/// Coverage-width criterion with the target coverage `1 - alpha`.
pub fn cwc(nmpiw: f64, picp: f64, alpha: f64) -> f64 {
    let mu = 1.0 - alpha;
    nmpiw * (1.0 + CWC_GAMMA * (-CWC_ETA * (picp - mu)).exp())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return param_err(format!("alpha = {alpha} must lie in (0, 1)"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub picp: f64,
    pub mpiw: f64,
    pub nmpiw: f64,
    pub mpe: f64,
    pub sharpness: f64,
    pub winkler: f64,
    pub cwc: f64,
    pub n_eval: usize,
    pub alpha: f64,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 7] = ["picp", "mpiw", "nmpiw", "mpe", "sharpness", "winkler", "cwc"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.picp,
            self.mpiw,
            self.nmpiw,
            self.mpe,
            self.sharpness,
            self.winkler,
            self.cwc,
        ]
    }

    /// Field-wise mean of several reports; `n_eval` and `alpha` come from the first.
    pub fn mean_of(reports: &[MetricsReport]) -> Option<MetricsReport> {
        let first = reports.first()?;
        let k = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        Some(MetricsReport {
            picp: avg(|r| r.picp),
            mpiw: avg(|r| r.mpiw),
            nmpiw: avg(|r| r.nmpiw),
            mpe: avg(|r| r.mpe),
            sharpness: avg(|r| r.sharpness),
            winkler: avg(|r| r.winkler),
            cwc: avg(|r| r.cwc),
            n_eval: first.n_eval,
            alpha: first.alpha,
        })
    }

    /// Field-wise sample standard deviation (zero for fewer than two reports).
    pub fn std_of(reports: &[MetricsReport]) -> Option<[f64; 7]> {
        let m = MetricsReport::mean_of(reports)?.values();
        let mut out = [0.0; 7];
        if reports.len() < 2 {
            return Some(out);
        }
        for r in reports {
            for (o, (v, mu)) in out.iter_mut().zip(r.values().iter().zip(&m)) {
                *o += (v - mu).powi(2);
            }
        }
        for o in &mut out {
            *o = (*o / (reports.len() - 1) as f64).sqrt();
        }
        Some(out)
    }
}

/// All seven metrics on one mask.
pub fn report(iv: &IntervalSet, y: &[f64], mask: &[bool], alpha: f64) -> Result<MetricsReport> {
    check_alpha(alpha)?;
    check_targets(iv, y)?;
    let idx = eval_indices(iv, mask)?;
    let range = target_range(y, &idx)?;
    let mut covered = 0usize;
    let (mut width, mut sq, mut err, mut wink) = (0.0, 0.0, 0.0, 0.0);
    for &v in &idx {
        let (lo, hi, t) = (iv.low[v], iv.up[v], y[v]);
        let w = hi - lo;
        if lo <= t && t <= hi {
            covered += 1;
        }
        width += w;
        sq += w * w;
        err += (0.5 * (lo + hi) - t).abs();
        wink += w + 2.0 / alpha * (lo - t).max(t - hi).max(0.0);
    }
    let n = idx.len() as f64;
    let picp = covered as f64 / n;
    let nmpiw = width / n / range;
    Ok(MetricsReport {
        picp,
        mpiw: width / n,
        nmpiw,
        mpe: err / n,
        sharpness: sq / n,
        winkler: wink / n,
        cwc: cwc(nmpiw, picp, alpha),
        n_eval: idx.len(),
        alpha,
    })
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub dataset: String,
    pub model: String,
    pub lambda: f64,
    pub seed: u64,
    pub picp: f64,
    pub mpiw: f64,
    pub nmpiw: f64,
    pub mpe: f64,
    pub sharpness: f64,
    pub winkler: f64,
    pub cwc: f64,
}

impl MetricsRow {
    pub fn new(run_id: &str, dataset: &str, model: &str, lambda: f64, seed: u64, r: &MetricsReport) -> Self {
        MetricsRow {
            run_id: run_id.to_string(),
            dataset: dataset.to_string(),
            model: model.to_string(),
            lambda,
            seed,
            picp: r.picp,
            mpiw: r.mpiw,
            nmpiw: r.nmpiw,
            mpe: r.mpe,
            sharpness: r.sharpness,
            winkler: r.winkler,
            cwc: r.cwc,
        }
    }
}
