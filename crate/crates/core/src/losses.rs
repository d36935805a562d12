//! Training objectives.
//!
//! Each loss comes in two forms: a plain function on values, used for
//! reporting and as a test oracle, and a `*_tape` function that records the
//! same quantity for differentiation. Coverage indicators enter the tape as
//! constants, so gradients flow only through bound distances and widths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Tensor, Var};
use crate::error::{param_err, shape_err, Error, Result};
use crate::graph::{mask_indices, Graph};
use crate::model::{append_level, encode, point_forward, IntervalSet};
use crate::rng;

/// Logistic temperature of the smoothed coverage indicator.
pub const SMOOTH_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthNorm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub lambda_width: f64,
    pub gamma_order: f64,
    pub rqr_lambda: f64,
    pub width_norm: WidthNorm,
    /// Replace the hard coverage indicator by a logistic surrogate so the
    /// coverage term also carries gradient.
    pub smooth_coverage: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.1,
            lambda_width: 0.5,
            gamma_order: 1.0,
            rqr_lambda: 1.0,
            width_norm: WidthNorm::L1,
            smooth_coverage: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return param_err(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        for (name, v) in [
            ("lambda_width", self.lambda_width),
            ("gamma_order", self.gamma_order),
            ("rqr_lambda", self.rqr_lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return param_err(format!("{name} = {v} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub coverage_term: f64,
    pub violation_term: f64,
    /// Unweighted width term; enters the total multiplied by `lambda_width`.
    pub width_term: f64,
    pub empirical_coverage: f64,
}

fn check_lengths(n: usize, others: &[(&str, usize)]) -> Result<()> {
    for (what, len) in others {
        if *len != n {
            return shape_err(format!("{what} has length {len}, expected {n}"));
        }
    }
    Ok(())
}

fn masked(mask: &[bool]) -> Result<Vec<usize>> {
    let idx = mask_indices(mask);
    if idx.is_empty() {
        return Err(Error::Contract("evaluation mask is empty".into()));
    }
    Ok(idx)
}

fn mean_over(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&v| f(v)).sum::<f64>() / idx.len() as f64
}

/// Fraction of masked nodes with `low <= y <= up`.
pub fn empirical_coverage(iv: &IntervalSet, y: &[f64], mask: &[bool]) -> Result<f64> {
    check_lengths(iv.len(), &[("targets", y.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    Ok(mean_over(&idx, |v| if iv.covers(v, y[v]) { 1.0 } else { 0.0 }))
}

// Crossed bounds can be violated on both sides at once; both distances count.
fn violation(low: f64, up: f64, y: f64) -> f64 {
    let below = if y < low { low - y } else { 0.0 };
    let above = if y > up { y - up } else { 0.0 };
    below + above
}

/// Mean distance from each uncovered target to the bound it crosses.
pub fn violation_loss(iv: &IntervalSet, y: &[f64], mask: &[bool]) -> Result<f64> {
    check_lengths(iv.len(), &[("targets", y.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    Ok(mean_over(&idx, |v| violation(iv.low[v], iv.up[v], y[v])))
}

fn smooth_indicator(low: f64, up: f64, y: f64) -> f64 {
    use crate::diff::logistic_scalar as s;
    s((y - low) / SMOOTH_TEMPERATURE) * s((up - y) / SMOOTH_TEMPERATURE)
}

/// Coverage/width joint loss on plain values.
pub fn qpi_total_loss(iv: &IntervalSet, y: &[f64], mask: &[bool], cfg: &LossConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    let c_hat = empirical_coverage(iv, y, mask)?;
    let idx = masked(mask)?;
    let c_term = if cfg.smooth_coverage {
        mean_over(&idx, |v| smooth_indicator(iv.low[v], iv.up[v], y[v]))
    } else {
        c_hat
    };
    let coverage_term = (c_term - (1.0 - cfg.alpha)).powi(2);
    let violation_term = violation_loss(iv, y, mask)?;
    let width_term = match cfg.width_norm {
        WidthNorm::L1 => mean_over(&idx, |v| iv.width(v)),
        WidthNorm::L2 => mean_over(&idx, |v| iv.width(v).powi(2)),
    };
    Ok(LossBreakdown {
        total: coverage_term + violation_term + cfg.lambda_width * width_term,
        coverage_term,
        violation_term,
        width_term,
        empirical_coverage: c_hat,
    })
}

/// Mean of `(tau - [y < y_hat]) (y - y_hat)`.
pub fn pinball_loss(y: &[f64], y_hat: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return param_err(format!("quantile level {tau} must lie in (0, 1)"));
    }
    check_lengths(y.len(), &[("predictions", y_hat.len())])?;
    if y.is_empty() {
        return Err(Error::Contract("pinball loss of no samples".into()));
    }
    Ok(y
        .iter()
        .zip(y_hat)
        .map(|(&t, &p)| pinball(t, p, tau))
        .sum::<f64>()
        / y.len() as f64)
}

fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    let ind = if y < q { 1.0 } else { 0.0 };
    (tau - ind) * (y - q)
}

fn rqr_node(low: f64, up: f64, y: f64, alpha: f64, lambda: f64) -> f64 {
    let covered = if low <= y && y <= up { 1.0 } else { 0.0 };
    (alpha + 2.0 * lambda - covered) * (y - low) * (y - up) + 0.5 * lambda * (up - low).powi(2)
}

/// Width-regularized RQR objective. Bounds may cross.
pub fn rqr_w_loss(low: &[f64], up: &[f64], y: &[f64], mask: &[bool], alpha: f64, lambda: f64) -> Result<f64> {
    check_lengths(y.len(), &[("low", low.len()), ("up", up.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    Ok(mean_over(&idx, |v| rqr_node(low[v], up[v], y[v], alpha, lambda)))
}

/// RQR objective plus `gamma_order * mean(relu(low - up))`.
pub fn rqr_adj_loss(
    low: &[f64],
    up: &[f64],
    y: &[f64],
    mask: &[bool],
    alpha: f64,
    lambda: f64,
    gamma_order: f64,
) -> Result<f64> {
    if !(gamma_order >= 0.0) {
        return param_err(format!("gamma_order = {gamma_order} must be non-negative"));
    }
    let base = rqr_w_loss(low, up, y, mask, alpha, lambda)?;
    let idx = masked(mask)?;
    Ok(base + gamma_order * mean_over(&idx, |v| (low[v] - up[v]).max(0.0)))
}

pub fn mse_loss(y_hat: &[f64], y: &[f64], mask: &[bool]) -> Result<f64> {
    check_lengths(y.len(), &[("predictions", y_hat.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    Ok(mean_over(&idx, |v| (y_hat[v] - y[v]).powi(2)))
}

/// The three QpiGNN terms recorded separately so ablations can drop any of them.
#[derive(Debug, Clone, Copy)]
pub struct QpiTerms {
    pub coverage: Var,
    pub violation: Var,
    /// Unweighted width term.
    pub width: Var,
    pub empirical_coverage: f64,
}

struct MaskedBounds {
    low: Var,
    up: Var,
    y: Var,
    y_vals: Vec<f64>,
    low_vals: Vec<f64>,
    up_vals: Vec<f64>,
}

fn select_bounds(tape: &mut Tape<'_>, low: Var, up: Var, y: &[f64], mask: &[bool]) -> Result<MaskedBounds> {
    let n = tape.value(low).rows();
    check_lengths(n, &[("upper bounds", tape.value(up).rows()), ("targets", y.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    let low = tape.select_rows(low, idx.clone())?;
    let up = tape.select_rows(up, idx.clone())?;
    let y_vals: Vec<f64> = idx.iter().map(|&v| y[v]).collect();
    let y = tape.constant(Tensor::column(y_vals.clone()));
    let low_vals = tape.value(low).data().to_vec();
    let up_vals = tape.value(up).data().to_vec();
    Ok(MaskedBounds {
        low,
        up,
        y,
        y_vals,
        low_vals,
        up_vals,
    })
}

fn indicator_column(values: impl Iterator<Item = bool>) -> Tensor {
    Tensor::column(values.map(|b| if b { 1.0 } else { 0.0 }).collect())
}

/// Record the coverage, violation and width terms for bounds `low`, `up` (n x 1).
pub fn qpi_terms_tape(
    tape: &mut Tape<'_>,
    low: Var,
    up: Var,
    y: &[f64],
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<QpiTerms> {
    cfg.validate()?;
    let b = select_bounds(tape, low, up, y, mask)?;
    let m = b.y_vals.len();
    let covered = (0..m).filter(|&i| b.low_vals[i] <= b.y_vals[i] && b.y_vals[i] <= b.up_vals[i]);
    let c_hat = covered.count() as f64 / m as f64;
    let target = 1.0 - cfg.alpha;

    let coverage = if cfg.smooth_coverage {
        let inv_t = 1.0 / SMOOTH_TEMPERATURE;
        let above_low = tape.sub(b.y, b.low)?;
        let above_low = tape.scale(above_low, inv_t);
        let s_low = tape.logistic(above_low);
        let below_up = tape.sub(b.up, b.y)?;
        let below_up = tape.scale(below_up, inv_t);
        let s_up = tape.logistic(below_up);
        let soft = tape.mul(s_low, s_up)?;
        let c = tape.reduce_mean(soft)?;
        let gap = tape.add_scalar(c, -target);
        tape.square(gap)
    } else {
        tape.constant(Tensor::scalar((c_hat - target).powi(2)))
    };

    let below = tape.constant(indicator_column((0..m).map(|i| b.y_vals[i] < b.low_vals[i])));
    let above = tape.constant(indicator_column((0..m).map(|i| b.y_vals[i] > b.up_vals[i])));
    let low_gap = tape.sub(b.low, b.y)?;
    let low_part = tape.mul(low_gap, below)?;
    let up_gap = tape.sub(b.y, b.up)?;
    let up_part = tape.mul(up_gap, above)?;
    let per_node = tape.add(low_part, up_part)?;
    let violation = tape.reduce_mean(per_node)?;

    let w = tape.sub(b.up, b.low)?;
    let width = match cfg.width_norm {
        WidthNorm::L1 => tape.reduce_mean(w)?,
        WidthNorm::L2 => {
            let sq = tape.square(w);
            tape.reduce_mean(sq)?
        }
    };
    Ok(QpiTerms {
        coverage,
        violation,
        width,
        empirical_coverage: c_hat,
    })
}

/// Record `coverage + violation + lambda_width * width` and report its parts.
pub fn qpi_total_loss_tape(
    tape: &mut Tape<'_>,
    low: Var,
    up: Var,
    y: &[f64],
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<(Var, LossBreakdown)> {
    let terms = qpi_terms_tape(tape, low, up, y, mask, cfg)?;
    let cv = tape.add(terms.coverage, terms.violation)?;
    let wl = tape.scale(terms.width, cfg.lambda_width);
    let total = tape.add(cv, wl)?;
    let breakdown = LossBreakdown {
        total: tape.value(total).item(),
        coverage_term: tape.value(terms.coverage).item(),
        violation_term: tape.value(terms.violation).item(),
        width_term: tape.value(terms.width).item(),
        empirical_coverage: terms.empirical_coverage,
    };
    Ok((total, breakdown))
}

/// Pinball loss with one level per masked row of `pred`.
pub fn pinball_tape(tape: &mut Tape<'_>, pred: Var, y: &[f64], taus: &[f64], mask: &[bool]) -> Result<Var> {
    let n = tape.value(pred).rows();
    check_lengths(n, &[("targets", y.len()), ("levels", taus.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    let p_vals: Vec<f64> = idx.iter().map(|&v| tape.value(pred).data()[v]).collect();
    let q = tape.select_rows(pred, idx.clone())?;
    let y_sel: Vec<f64> = idx.iter().map(|&v| y[v]).collect();
    let coef: Vec<f64> = idx
        .iter()
        .zip(&p_vals)
        .map(|(&v, &p)| taus[v] - if y[v] < p { 1.0 } else { 0.0 })
        .collect();
    let yc = tape.constant(Tensor::column(y_sel));
    let resid = tape.sub(yc, q)?;
    let coef = tape.constant(Tensor::column(coef));
    let per_node = tape.mul(resid, coef)?;
    tape.reduce_mean(per_node)
}

/// Monte-Carlo SQR objective: every node draws its own level uniformly from
/// (0, 1) under `seed`, the model sees that level as an extra input column,
/// and the pinball loss is averaged over the masked nodes.
pub fn sqr_loss_tape<'g>(
    tape: &mut Tape<'g>,
    graph: &'g Graph,
    x: &Tensor,
    y: &[f64],
    mask: &[bool],
    params: &crate::diff::ParamStore,
    seed: u64,
) -> Result<Var> {
    let taus = sample_levels(x.rows(), seed);
    let xa = append_level(x, &taus)?;
    let xv = tape.constant(xa);
    let h = encode(tape, graph, xv, params, 0.0, true, seed)?;
    let pred = point_forward(tape, h, params)?;
    pinball_tape(tape, pred, y, &taus, mask)
}

/// Per-node quantile levels for one SQR evaluation, uniform on (0, 1).
pub fn sample_levels(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "sqr-levels", 0);
    (0..n)
        .map(|_| loop {
            let t: f64 = r.random();
            if t > 0.0 {
                break t;
            }
        })
        .collect()
}

fn rqr_core(tape: &mut Tape<'_>, b: &MaskedBounds, alpha: f64, lambda: f64) -> Result<Var> {
    let m = b.y_vals.len();
    let coef: Vec<f64> = (0..m)
        .map(|i| {
            let covered = b.low_vals[i] <= b.y_vals[i] && b.y_vals[i] <= b.up_vals[i];
            alpha + 2.0 * lambda - if covered { 1.0 } else { 0.0 }
        })
        .collect();
    let coef = tape.constant(Tensor::column(coef));
    let a = tape.sub(b.y, b.low)?;
    let c = tape.sub(b.y, b.up)?;
    let prod = tape.mul(a, c)?;
    let weighted = tape.mul(prod, coef)?;
    let w = tape.sub(b.up, b.low)?;
    let w2 = tape.square(w);
    let w2 = tape.scale(w2, 0.5 * lambda);
    let per_node = tape.add(weighted, w2)?;
    tape.reduce_mean(per_node)
}

pub fn rqr_w_loss_tape(
    tape: &mut Tape<'_>,
    low: Var,
    up: Var,
    y: &[f64],
    mask: &[bool],
    alpha: f64,
    lambda: f64,
) -> Result<Var> {
    let b = select_bounds(tape, low, up, y, mask)?;
    rqr_core(tape, &b, alpha, lambda)
}

#[allow(clippy::too_many_arguments)]
pub fn rqr_adj_loss_tape(
    tape: &mut Tape<'_>,
    low: Var,
    up: Var,
    y: &[f64],
    mask: &[bool],
    alpha: f64,
    lambda: f64,
    gamma_order: f64,
) -> Result<Var> {
    if !(gamma_order >= 0.0) {
        return param_err(format!("gamma_order = {gamma_order} must be non-negative"));
    }
    let b = select_bounds(tape, low, up, y, mask)?;
    let base = rqr_core(tape, &b, alpha, lambda)?;
    let cross = tape.sub(b.low, b.up)?;
    let cross = tape.relu(cross);
    let order = tape.reduce_mean(cross)?;
    let order = tape.scale(order, gamma_order);
    tape.add(base, order)
}

pub fn mse_loss_tape(tape: &mut Tape<'_>, y_hat: Var, y: &[f64], mask: &[bool]) -> Result<Var> {
    let n = tape.value(y_hat).rows();
    check_lengths(n, &[("targets", y.len()), ("mask", mask.len())])?;
    let idx = masked(mask)?;
    let p = tape.select_rows(y_hat, idx.clone())?;
    let yc = tape.constant(Tensor::column(idx.iter().map(|&v| y[v]).collect()));
    let r = tape.sub(p, yc)?;
    let sq = tape.square(r);
    tape.reduce_mean(sq)
}
