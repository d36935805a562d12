//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Desk-scale runs use hidden width 8; see the README for why the library
//! default of 64 is not used here.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use qpignn::diff::{finite_diff_check, ParamStore, Tape};
use qpignn::graph::{synth_dataset, Dataset, FeatureFamily, GraphSpec, MaskKind, PerturbKind};
use qpignn::harness::experiments::{self, ABLATION_CONFIGS};
use qpignn::harness::theory::{self, FixedRule};
use qpignn::harness::{self, tuning, LossKind, TrainConfig};
use qpignn::losses::{self, LossConfig};
use qpignn::metrics;
use qpignn::model::{bounds_forward, encode, IntervalSet, Variant};
use qpignn::rng;
use rand::Rng;

use common::{features, jittered_params, normal_vec, six_node_graph};

const DESK_NODES: usize = 2000;
const DESK_HIDDEN: usize = 8;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn desk_dataset() -> Dataset {
    let g = GraphSpec::family_of_size("er", DESK_NODES).unwrap().build(0).unwrap();
    synth_dataset(&g, FeatureFamily::Gaussian, 8, 1.0, 0).unwrap()
}

fn desk_config(lambda: f64) -> TrainConfig {
    TrainConfig {
        hidden: DESK_HIDDEN,
        lambda_width: lambda,
        ..TrainConfig::default()
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let g = six_node_graph();
    let x = features(6, 3, 21);
    let y = normal_vec(6, 21, "fixture-y");
    let mask = [true; 6];
    let (h, tol) = (1e-5, 1e-4);

    let dual = jittered_params(Variant::DualHead, 3, 4, 21);
    let cfg = LossConfig::default();
    let full = finite_diff_check(&dual, h, |t: &mut Tape<'_>, p: &ParamStore| {
        let xv = t.constant(x.clone());
        let e = encode(t, &g, xv, p, 0.0, false, 0)?;
        let (lo, up) = bounds_forward(t, e, p, Variant::DualHead)?;
        Ok(losses::qpi_total_loss_tape(t, lo, up, &y, &mask, &cfg)?.0)
    })
    .unwrap();

    let sqr_p = jittered_params(Variant::SqrHead, 3, 4, 22);
    let sqr = finite_diff_check(&sqr_p, h, |t: &mut Tape<'_>, p: &ParamStore| {
        losses::sqr_loss_tape(t, &g, &x, &y, &mask, p, 3)
    })
    .unwrap();

    let rqr_p = jittered_params(Variant::RqrHead, 3, 4, 23);
    let rqr = finite_diff_check(&rqr_p, h, |t: &mut Tape<'_>, p: &ParamStore| {
        let xv = t.constant(x.clone());
        let e = encode(t, &g, xv, p, 0.0, false, 0)?;
        let (lo, up) = bounds_forward(t, e, p, Variant::RqrHead)?;
        losses::rqr_adj_loss_tape(t, lo, up, &y, &mask, 0.1, 1.0, 1.0)
    })
    .unwrap();

    let secs = start.elapsed().as_secs_f64();
    let errs = [full.max_relative_error, sqr.max_relative_error, rqr.max_relative_error];
    outcome(
        errs.iter().all(|e| *e < tol) && secs < 5.0,
        format!("max rel err qpi {:.2e}, sqr {:.2e}, rqr-adj {:.2e}; {secs:.2}s", errs[0], errs[1], errs[2]),
    )
}

/// The seven metrics, one node at a time.
fn oracle(low: &[f64], up: &[f64], y: &[f64], mask: &[bool], alpha: f64) -> [f64; 7] {
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for v in 0..y.len() {
        if mask[v] {
            ymin = ymin.min(y[v]);
            ymax = ymax.max(y[v]);
        }
    }
    let (mut n, mut hit, mut w, mut nw, mut e, mut s, mut ws) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for v in 0..y.len() {
        if !mask[v] {
            continue;
        }
        n += 1.0;
        let width = up[v] - low[v];
        if low[v] <= y[v] && y[v] <= up[v] {
            hit += 1.0;
        }
        w += width;
        nw += width / (ymax - ymin);
        e += ((low[v] + up[v]) / 2.0 - y[v]).abs();
        s += width * width;
        let miss = if y[v] < low[v] {
            low[v] - y[v]
        } else if y[v] > up[v] {
            y[v] - up[v]
        } else {
            0.0
        };
        ws += width + 2.0 / alpha * miss;
    }
    let picp = hit / n;
    let nmpiw = nw / n;
    let cwc = nmpiw * (1.0 + (-10.0 * (picp - (1.0 - alpha))).exp());
    [picp, w / n, nmpiw, e / n, s / n, ws / n, cwc]
}

fn metric_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut r = rng::stream(99, "acceptance-metrics", inst);
        let n = 50;
        let mut low = Vec::with_capacity(n);
        let mut up = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let c: f64 = r.random_range(-3.0..3.0);
            let hw: f64 = if r.random_bool(0.1) { 0.0 } else { r.random_range(0.0..2.0) };
            low.push(c - hw);
            up.push(c + hw);
            // Some targets sit exactly on a bound.
            y.push(if r.random_bool(0.05) { c + hw } else { r.random_range(-4.0..4.0) });
        }
        let mut mask: Vec<bool> = (0..n).map(|_| r.random_bool(0.7)).collect();
        mask[0] = true;
        mask[1] = true;
        y[1] = y[0] + 1.0;
        let alpha = r.random_range(0.01..0.5);
        let iv = IntervalSet::new(low.clone(), up.clone()).unwrap();
        let want = oracle(&low, &up, &y, &mask, alpha);
        let rep = metrics::report(&iv, &y, &mask, alpha).unwrap().values();
        let picp = metrics::picp(&iv, &y, &mask).unwrap();
        let nmpiw = metrics::nmpiw(&iv, &y, &mask).unwrap();
        let single = [
            picp,
            metrics::mpiw(&iv, &mask).unwrap(),
            nmpiw,
            metrics::mpe(&iv, &y, &mask).unwrap(),
            metrics::sharpness(&iv, &mask).unwrap(),
            metrics::winkler(&iv, &y, &mask, alpha).unwrap(),
            metrics::cwc(nmpiw, picp, alpha),
        ];
        for k in 0..7 {
            worst = worst.max((rep[k] - want[k]).abs()).max((single[k] - want[k]).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |metric - oracle| = {worst:.2e} over 100 instances of 50 nodes"))
}

struct Calibration {
    lambda: f64,
    outcome: Outcome,
}

fn calibration(ds: &Dataset) -> Calibration {
    let start = Instant::now();
    let base = desk_config(0.05);
    let sweep = tuning::lambda_tune(ds, &base, tuning::DEFAULT_BOUNDS, tuning::DEFAULT_BUDGET, 1).unwrap();
    let lambda = sweep.chosen_lambda;
    let cfg = desk_config(lambda);
    let (model, rec) = harness::train(ds, &cfg).unwrap();
    let iv = harness::predict(ds, &model, &cfg).unwrap();
    let test = ds.masks.indices(MaskKind::Test);
    let mse = test.iter().map(|&v| (ds.targets[v] - iv.center(v)).powi(2)).sum::<f64>() / test.len() as f64;
    let sigma_hat = mse.sqrt();
    let optimal = 2.0 * theory::gaussian_optimal_halfwidth(sigma_hat, 0.1).unwrap();
    let t = rec.metrics.test;
    let secs = start.elapsed().as_secs_f64();
    let pass = (0.85..=0.95).contains(&t.picp) && t.mpiw <= 1.3 * optimal && secs < 180.0;
    Calibration {
        lambda,
        outcome: outcome(
            pass,
            format!(
                "tuned lambda {lambda:.4}: test PICP {:.4}, MPIW {:.4} vs 1.3 x {optimal:.4} (residual sigma {sigma_hat:.4}); {secs:.1}s",
                t.picp, t.mpiw
            ),
        ),
    }
}

fn ablation(ds: &Dataset, lambda: f64) -> Outcome {
    let rows = experiments::ablation_suite(ds, &desk_config(lambda), &ABLATION_CONFIGS, &SEEDS, 1).unwrap();
    let find = |v: Variant, k: LossKind| rows.iter().find(|r| r.variant == v && r.loss_kind == k).unwrap().mean;
    let full = find(Variant::DualHead, LossKind::Full);
    let cov = find(Variant::DualHead, LossKind::CoverageOnly);
    let wid = find(Variant::DualHead, LossKind::WidthOnly);
    let fixed = find(Variant::FixedMargin, LossKind::Full);
    let single = find(Variant::SingleHead, LossKind::Full);
    let checks = [
        wid.picp < 0.05,
        cov.picp >= 0.98,
        cov.mpiw >= 1.5 * full.mpiw,
        full.cwc < fixed.cwc,
        full.cwc < single.cwc,
    ];
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "width-only PICP {:.3}; coverage-only PICP {:.3}, MPIW {:.3} vs full {:.3}; CWC full {:.3}, fixed-margin {:.3}, single-head {:.3}",
            wid.picp, cov.picp, cov.mpiw, full.mpiw, full.cwc, fixed.cwc, single.cwc
        ),
    )
}

fn tradeoff(ds: &Dataset) -> Outcome {
    let sweep = tuning::lambda_sweep(ds, &desk_config(0.05), &tuning::DEFAULT_GRID, 1).unwrap();
    let picps: Vec<f64> = sweep.entries.iter().map(|e| e.test.picp).collect();
    let inversions = experiments::coverage_inversions(&sweep);
    let at = |l: f64| sweep.entry(l).unwrap().test.picp;
    let pass = inversions <= 1 && at(0.1) >= at(1.2);
    let shown: Vec<String> = sweep.entries.iter().zip(&picps).map(|(e, p)| format!("{}:{p:.3}", e.lambda)).collect();
    outcome(pass, format!("PICP by lambda [{}], {inversions} inversion(s)", shown.join(" ")))
}

fn concentration() -> Outcome {
    let rule = FixedRule::standard(0.1).unwrap();
    let rep = theory::concentration_check(&rule, 1000, 500, 0.05, 7).unwrap();
    let pass = rep.exceedance <= 0.075 && (0.4..=0.6).contains(&rep.std_ratio);
    outcome(
        pass,
        format!(
            "exceedance {:.4} (limit 0.075, eps {:.4}); std(c) at N=1000 {:.5}, N=4000 {:.5}, ratio {:.3}",
            rep.exceedance, rep.epsilon, rep.std_by_n[1].1, rep.std_by_n[2].1, rep.std_ratio
        ),
    )
}

fn convergence(ds: &Dataset, lambda: f64) -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in SEEDS {
        let cfg = TrainConfig { seed, ..desk_config(lambda) };
        let (_, rec) = harness::train(ds, &cfg).unwrap();
        let rep = theory::convergence_check(&rec).unwrap();
        worst = worst.max(rep.grad_ratio);
        if !rep.passes() {
            failures.push(format!("seed {seed}: {}", rep.message));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} runs, worst last/first-decile gradient ratio {worst:.3}", SEEDS.len())
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn robustness(ds: &Dataset, lambda: f64) -> Outcome {
    let levels = vec![
        (PerturbKind::TargetNoise, vec![0.1, 0.2, 0.3]),
        (PerturbKind::EdgeDropout, vec![0.2]),
    ];
    let t = experiments::robustness_suite(ds, &desk_config(lambda), &levels, 1).unwrap();
    let noise = t.rows_of(PerturbKind::TargetNoise);
    let widths: Vec<f64> = noise.iter().map(|r| r.test.mpiw).collect();
    let picps: Vec<f64> = noise.iter().map(|r| r.test.picp).collect();
    let drop = t.rows_of(PerturbKind::EdgeDropout)[0].test.picp;
    let pass = widths.windows(2).all(|w| w[1] >= w[0])
        && picps.iter().all(|p| *p >= 0.85)
        && (drop - t.clean.picp).abs() <= 0.1;
    outcome(
        pass,
        format!(
            "target noise MPIW {:.3?}, PICP {:.3?}; edge dropout 0.2 PICP {drop:.3} vs clean {:.3}",
            widths, picps, t.clean.picp
        ),
    )
}

fn report(n: usize, name: &str, o: &Outcome) {
    println!("criterion {n} [{name}]: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() -> ExitCode {
    let mut all = true;
    let mut record = |n: usize, name: &str, o: Outcome| {
        report(n, name, &o);
        all &= o.pass;
    };
    record(1, "gradient correctness", gradients());
    record(2, "metric oracle equivalence", metric_oracle());
    let ds = desk_dataset();
    let cal = calibration(&ds);
    let lambda = cal.lambda;
    record(3, "calibration at desk scale", cal.outcome);
    record(4, "ablation directionality", ablation(&ds, lambda));
    record(5, "lambda trade-off shape", tradeoff(&ds));
    record(6, "coverage concentration", concentration());
    record(7, "convergence", convergence(&ds, lambda));
    record(8, "robustness trends", robustness(&ds, lambda));
    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: at least one criterion failed");
        ExitCode::FAILURE
    }
}
