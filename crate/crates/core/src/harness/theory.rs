//! Empirical checks of coverage concentration, the Gaussian width optimum and
//! training convergence.

use rand_distr::{Distribution, Normal as NormalSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::train::RunRecord;
use crate::error::{param_err, Result};
use crate::rng;

/// Half-width `eps` such that empirical coverage of `n` i.i.d. nodes lies
/// within `eps` of its expectation with probability at least `1 - delta`.
pub fn hoeffding_epsilon(n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return param_err("sample size must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return param_err(format!("delta {delta} must lie in (0, 1)"));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Two-sided bounded-differences tail bound `2 exp(-2 n eps^2)` (capped at 1).
pub fn mcdiarmid_prob(n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return param_err("sample size must be positive");
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return param_err(format!("eps {eps} must be non-negative"));
    }
    Ok((2.0 * (-2.0 * n as f64 * eps * eps).exp()).min(1.0))
}

/// Narrowest symmetric half-width reaching `1 - alpha` coverage of
/// `N(mu, sigma^2)`.
pub fn gaussian_optimal_halfwidth(sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return param_err(format!("sigma {sigma} must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return param_err(format!("alpha {alpha} must lie in (0, 1)"));
    }
    Ok(sigma * std_normal().inverse_cdf(1.0 - alpha / 2.0))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Fixed symmetric interval `[-half_width, half_width]` scored against
/// `N(0, sigma^2)` targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedRule {
    pub half_width: f64,
    pub sigma: f64,
}

impl FixedRule {
    /// The rule at the Gaussian optimum for `alpha` on unit-variance targets.
    pub fn standard(alpha: f64) -> Result<Self> {
        Ok(FixedRule {
            half_width: gaussian_optimal_halfwidth(1.0, alpha)?,
            sigma: 1.0,
        })
    }

    pub fn expected_coverage(&self) -> f64 {
        2.0 * std_normal().cdf(self.half_width / self.sigma) - 1.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.half_width >= 0.0) {
            return param_err("rule needs sigma > 0 and a non-negative half-width");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub trials: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub expected_coverage: f64,
    pub mean_coverage: f64,
    /// Fraction of trials with `|c_hat - c| > epsilon`.
    pub exceedance: f64,
    /// `delta` times the sampling slack.
    pub allowed_exceedance: f64,
    /// `(sample size, std of c_hat over trials)` at `n/4`, `n` and `4n`.
    pub std_by_n: Vec<(usize, f64)>,
    /// `std(4n) / std(n)`; about one half when `std ~ 1/sqrt(n)`.
    pub std_ratio: f64,
}

impl ConcentrationReport {
    pub fn bound_holds(&self) -> bool {
        self.exceedance <= self.allowed_exceedance
    }

    pub fn scaling_holds(&self) -> bool {
        self.std_ratio <= 0.6
    }

    pub fn passes(&self) -> bool {
        self.bound_holds() && self.scaling_holds()
    }
}

/// Slack on `delta` that absorbs Monte Carlo noise in the exceedance count.
pub const EXCEEDANCE_SLACK: f64 = 1.5;

fn coverage_trials(rule: &FixedRule, n: usize, trials: usize, seed: u64) -> Vec<f64> {
    let dist = NormalSampler::new(0.0, rule.sigma).expect("validated sigma");
    let tag = format!("concentration-{n}");
    (0..trials)
        .map(|t| {
            let mut r = rng::stream(seed, &tag, t as u64);
            let hits = (0..n).filter(|_| dist.sample(&mut r).abs() <= rule.half_width).count();
            hits as f64 / n as f64
        })
        .collect()
}

fn std_of(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Resample `trials` sets of `n` targets, score `rule` on each, and compare
/// the spread of empirical coverage with the Hoeffding radius.
pub fn concentration_check(rule: &FixedRule, n: usize, trials: usize, delta: f64, seed: u64) -> Result<ConcentrationReport> {
    rule.validate()?;
    if trials < 2 {
        return param_err("concentration check needs at least two trials");
    }
    if n < 4 {
        return param_err("concentration check needs n >= 4");
    }
    let epsilon = hoeffding_epsilon(n, delta)?;
    let expected = rule.expected_coverage();
    let mut std_by_n = Vec::with_capacity(3);
    let mut main = Vec::new();
    for m in [n / 4, n, 4 * n] {
        let cs = coverage_trials(rule, m, trials, seed);
        std_by_n.push((m, std_of(&cs)));
        if m == n {
            main = cs;
        }
    }
    let exceed = main.iter().filter(|c| (*c - expected).abs() > epsilon).count();
    let (s_n, s_4n) = (std_by_n[1].1, std_by_n[2].1);
    let std_ratio = if s_n > 0.0 { s_4n / s_n } else { 0.0 };
    Ok(ConcentrationReport {
        n,
        trials,
        delta,
        epsilon,
        expected_coverage: expected,
        mean_coverage: main.iter().sum::<f64>() / trials as f64,
        exceedance: exceed as f64 / trials as f64,
        allowed_exceedance: delta * EXCEEDANCE_SLACK,
        std_by_n,
        std_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub first_decile_grad: f64,
    pub last_decile_grad: f64,
    /// `last_decile_grad / first_decile_grad`.
    pub grad_ratio: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub grad_ok: bool,
    pub loss_ok: bool,
    pub message: String,
}

impl ConvergenceReport {
    pub fn passes(&self) -> bool {
        self.grad_ok && self.loss_ok
    }
}

/// Largest admissible last/first-decile gradient-norm ratio.
pub const GRAD_RATIO_LIMIT: f64 = 0.25;

/// Gradient norms must shrink by a factor of four between the first and last
/// tenth of training, and the final loss must not exceed the initial loss.
pub fn convergence_check(rec: &RunRecord) -> Result<ConvergenceReport> {
    let g = &rec.grad_norm;
    if g.len() < 2 || rec.loss.len() != g.len() {
        return param_err("convergence check needs at least two recorded epochs");
    }
    let k = (g.len() / 10).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(&g[..k]);
    let last = mean(&g[g.len() - k..]);
    let grad_ratio = if first > 0.0 { last / first } else { f64::INFINITY };
    let initial_loss = rec.loss[0];
    let final_loss = *rec.loss.last().expect("non-empty");
    let grad_ok = grad_ratio <= GRAD_RATIO_LIMIT;
    let loss_ok = final_loss <= initial_loss;
    let descended = final_loss < initial_loss;
    let message = match (grad_ok, loss_ok) {
        (true, true) => format!("converged: gradient ratio {grad_ratio:.3}, loss {initial_loss:.4} -> {final_loss:.4}"),
        _ if !descended && (last - first).abs() <= 1e-12 * first.max(1.0) => {
            "no descent: gradient norms and loss did not move".to_string()
        }
        (false, _) => format!("not converged: gradient ratio {grad_ratio:.3} exceeds {GRAD_RATIO_LIMIT}"),
        (true, false) => format!("loss rose from {initial_loss:.4} to {final_loss:.4}"),
    };
    Ok(ConvergenceReport {
        first_decile_grad: first,
        last_decile_grad: last,
        grad_ratio,
        initial_loss,
        final_loss,
        grad_ok,
        loss_ok,
        message,
    })
}

/// When training ends with at least its initial coverage, the violation term
/// must not have grown. Vacuously true for records without a violation term.
pub fn violation_vanishes(rec: &RunRecord) -> bool {
    let (Some(&c0), Some(&c1)) = (rec.coverage.first(), rec.coverage.last()) else {
        return true;
    };
    let (Some(&v0), Some(&v1)) = (rec.violation.first(), rec.violation.last()) else {
        return true;
    };
    if [c0, c1, v0, v1].iter().any(|x| x.is_nan()) || c1 < c0 {
        return true;
    }
    v1 <= v0
}
