use qpignn::graph::{synth_dataset, Dataset, FeatureFamily, GraphSpec, PerturbKind, SplitKind};
use qpignn::harness::experiments::{self, ShiftSetup, ABLATION_CONFIGS};
use qpignn::harness::theory::convergence_check;
use qpignn::harness::{self, tuning, LossKind, TrainConfig};
use qpignn::model::Variant;

fn dataset(n: usize, seed: u64) -> Dataset {
    let g = GraphSpec::family_of_size("er", n).unwrap().build(seed).unwrap();
    synth_dataset(&g, FeatureFamily::Gaussian, 8, 1.0, seed).unwrap()
}

fn small() -> TrainConfig {
    TrainConfig {
        epochs: 150,
        hidden: 8,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let ds = dataset(300, 1);
    let (m1, r1) = harness::train(&ds, &small()).unwrap();
    let (m2, r2) = harness::train(&ds, &small()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(r1, r2);
    assert_eq!(r1.epochs(), 150);
}

#[test]
fn record_tracks_training_coverage() {
    let ds = dataset(300, 2);
    let (_, rec) = harness::train(&ds, &small()).unwrap();
    let last = *rec.coverage.last().unwrap();
    assert!((0.0..=1.0).contains(&last));
    assert!(rec.loss.iter().all(|l| l.is_finite()));
    assert!(rec.width.iter().all(|w| *w >= 0.0));
}

#[test]
fn objective_terms_pull_in_opposite_directions() {
    let ds = dataset(400, 3);
    let run = |kind| {
        let cfg = TrainConfig { loss_kind: kind, epochs: 300, ..small() };
        harness::train(&ds, &cfg).unwrap().1.metrics.test
    };
    let full = run(LossKind::Full);
    let cov = run(LossKind::CoverageOnly);
    let wid = run(LossKind::WidthOnly);
    assert!(cov.mpiw > full.mpiw, "{} vs {}", cov.mpiw, full.mpiw);
    assert!(wid.mpiw < full.mpiw);
    assert!(wid.picp < full.picp);
}

#[test]
fn every_baseline_trains_and_predicts() {
    let ds = dataset(200, 4);
    for kind in [LossKind::Sqr, LossKind::RqrAdj, LossKind::MseMcDropout] {
        let cfg = TrainConfig {
            epochs: 60,
            hidden: 8,
            mc_passes: 20,
            ..TrainConfig::baseline(kind).unwrap()
        };
        let (model, rec) = harness::train(&ds, &cfg).unwrap();
        assert_eq!(model.config.variant, kind.baseline_variant().unwrap());
        let iv = harness::predict(&ds, &model, &cfg).unwrap();
        assert_eq!(iv.len(), 200);
        assert!(rec.metrics.test.mpiw.is_finite(), "{kind:?}");
        if kind == LossKind::MseMcDropout {
            assert!(rec.coverage.iter().all(|c| c.is_nan()));
            assert!((0..200).all(|v| iv.low[v] <= iv.up[v]));
        }
    }
}

#[test]
fn mismatched_baseline_architecture_is_rejected() {
    let ds = dataset(50, 5);
    let cfg = TrainConfig {
        loss_kind: LossKind::Sqr,
        model_variant: Variant::DualHead,
        ..small()
    };
    assert!(harness::train(&ds, &cfg).is_err());
}

#[test]
fn zero_learning_rate_reports_no_descent() {
    let ds = dataset(100, 6);
    let cfg = TrainConfig { lr: 0.0, epochs: 20, ..small() };
    let (_, rec) = harness::train(&ds, &cfg).unwrap();
    let rep = convergence_check(&rec).unwrap();
    assert!(!rep.passes());
    assert!(rep.message.contains("no descent"), "{}", rep.message);
}

#[test]
fn ablation_rows_follow_config_order() {
    let ds = dataset(150, 7);
    let cfg = TrainConfig { epochs: 40, ..small() };
    let rows = experiments::ablation_suite(&ds, &cfg, &ABLATION_CONFIGS, &[0, 1], 1).unwrap();
    assert_eq!(rows.len(), ABLATION_CONFIGS.len());
    for (row, (v, k)) in rows.iter().zip(ABLATION_CONFIGS) {
        assert_eq!((row.variant, row.loss_kind), (v, k));
        assert_eq!(row.runs.len(), 2);
        let mean = (row.runs[0].test.picp + row.runs[1].test.picp) / 2.0;
        assert!((row.mean.picp - mean).abs() < 1e-12);
    }
    let fixed = &rows[4];
    assert!(fixed.runs.iter().all(|r| r.width_spread < 1e-9));
}

#[test]
fn robustness_zero_level_matches_clean_run() {
    let ds = dataset(150, 8);
    let cfg = TrainConfig { epochs: 40, ..small() };
    let levels = vec![(PerturbKind::TargetNoise, vec![0.0, 0.2]), (PerturbKind::EdgeDropout, vec![0.0])];
    let t = experiments::robustness_suite(&ds, &cfg, &levels, 1).unwrap();
    assert_eq!(t.rows.len(), 3);
    for r in t.rows.iter().filter(|r| r.level == 0.0) {
        assert_eq!(r.test, t.clean);
        assert_eq!(r.coverage_retention, 1.0);
    }
}

#[test]
fn shift_matrix_is_square_and_parallel_safe() {
    let setup = ShiftSetup {
        families: vec!["er".into(), "chain".into(), "grid".into()],
        nodes: 80,
        runs: 2,
        ..ShiftSetup::default()
    };
    let cfg = TrainConfig { epochs: 30, ..small() };
    let a = experiments::shift_matrix(&setup, &cfg, 1).unwrap();
    let b = experiments::shift_matrix(&setup, &cfg, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 3);
    assert!(a.cells.iter().all(|r| r.len() == 3));
    assert!(a.cells.iter().flatten().all(|c| (0.0..=1.0).contains(&c.picp)));
    assert!(experiments::shift_matrix(&ShiftSetup { families: vec!["er".into()], ..setup }, &cfg, 1).is_err());
}

#[test]
fn split_experiment_covers_requested_kinds() {
    let ds = dataset(200, 9);
    let cfg = TrainConfig { epochs: 30, ..small() };
    let kinds = [SplitKind::Random, SplitKind::Degree, SplitKind::Community];
    let rows = experiments::split_experiment(&ds, &cfg, &kinds, (0.6, 0.2, 0.2), 1).unwrap();
    assert_eq!(rows.iter().map(|r| r.kind).collect::<Vec<_>>(), kinds);
    assert!(rows.iter().all(|r| r.test.n_eval > 0));
}

#[test]
fn sweep_and_tune_choose_evaluated_values() {
    let ds = dataset(150, 10);
    let cfg = TrainConfig { epochs: 30, ..small() };
    let s = tuning::lambda_sweep(&ds, &cfg, &[0.5, 0.05, 0.2], 1).unwrap();
    let lams: Vec<f64> = s.entries.iter().map(|e| e.lambda).collect();
    assert_eq!(lams, vec![0.05, 0.2, 0.5]);
    assert!(s.entry(s.chosen_lambda).is_some());
    let best = s.entries.iter().map(|e| e.objective).fold(f64::INFINITY, f64::min);
    assert_eq!(s.chosen_objective, best);

    let t = tuning::lambda_tune(&ds, &cfg, (0.01, 1.0), 9, 1).unwrap();
    assert!(t.entries.len() <= 9 && t.entries.len() >= 5);
    assert!(t.entries.iter().all(|e| (0.01 - 1e-12..=1.0 + 1e-12).contains(&e.lambda)));
    assert!(tuning::lambda_tune(&ds, &cfg, (1.0, 0.5), 9, 1).is_err());
}
