//! Full-batch training loops.

use serde::{Deserialize, Serialize};

use crate::diff::{ParamStore, Tape, Var};
use crate::error::{param_err, Error, Result};
use crate::graph::{Dataset, MaskKind};
use crate::losses::{self, LossConfig, WidthNorm};
use crate::metrics::{self, MetricsReport};
use crate::model::{self, IntervalSet, Model, ModelConfig, Variant, DEFAULT_HIDDEN, DEFAULT_T_MULT};
use crate::optim::{adam_step, grad_norm, AdamConfig, AdamState, LrSchedule};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Coverage + violation + width.
    Full,
    /// Full loss with the width weight forced to zero.
    CoverageOnly,
    /// Width term alone.
    WidthOnly,
    /// Squared error of the interval center.
    MseOnly,
    Sqr,
    RqrAdj,
    /// Squared error with dropout active; intervals from MC dropout.
    MseMcDropout,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Full,
        LossKind::CoverageOnly,
        LossKind::WidthOnly,
        LossKind::MseOnly,
        LossKind::Sqr,
        LossKind::RqrAdj,
        LossKind::MseMcDropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Full => "full",
            LossKind::CoverageOnly => "coverage_only",
            LossKind::WidthOnly => "width_only",
            LossKind::MseOnly => "mse_only",
            LossKind::Sqr => "sqr",
            LossKind::RqrAdj => "rqr_adj",
            LossKind::MseMcDropout => "mse_mc_dropout",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Parameter(format!("unknown loss kind '{s}'")))
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, LossKind::Sqr | LossKind::RqrAdj | LossKind::MseMcDropout)
    }

    /// The model variant this baseline loss trains.
    pub fn baseline_variant(self) -> Option<Variant> {
        match self {
            LossKind::Sqr => Some(Variant::SqrHead),
            LossKind::RqrAdj => Some(Variant::RqrHead),
            LossKind::MseMcDropout => Some(Variant::Point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub alpha: f64,
    pub lambda_width: f64,
    pub seed: u64,
    pub model_variant: Variant,
    pub loss_kind: LossKind,
    pub dropout_p: f64,
    pub hidden: usize,
    pub width_norm: WidthNorm,
    pub smooth_coverage: bool,
    pub gamma_order: f64,
    pub rqr_lambda: f64,
    pub schedule: LrSchedule,
    pub decoupled_weight_decay: bool,
    pub mc_passes: usize,
    pub t_mult: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            lr: 1e-3,
            weight_decay: 1e-3,
            alpha: 0.1,
            lambda_width: 0.05,
            seed: 0,
            model_variant: Variant::DualHead,
            loss_kind: LossKind::Full,
            dropout_p: 0.0,
            hidden: DEFAULT_HIDDEN,
            width_norm: WidthNorm::L1,
            smooth_coverage: false,
            gamma_order: 1.0,
            rqr_lambda: 1.0,
            schedule: LrSchedule::Constant,
            decoupled_weight_decay: false,
            mc_passes: model::DEFAULT_MC_PASSES,
            t_mult: DEFAULT_T_MULT,
        }
    }
}

impl TrainConfig {
    /// Configuration for one of the three baselines with its usual model and dropout.
    pub fn baseline(kind: LossKind) -> Result<Self> {
        let variant = kind
            .baseline_variant()
            .ok_or_else(|| Error::Parameter(format!("{} is not a baseline loss", kind.name())))?;
        let dropout_p = if kind == LossKind::MseMcDropout {
            model::DEFAULT_MC_DROPOUT
        } else {
            0.0
        };
        Ok(TrainConfig {
            model_variant: variant,
            loss_kind: kind,
            dropout_p,
            ..TrainConfig::default()
        })
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            lambda_width: self.lambda_width,
            gamma_order: self.gamma_order,
            rqr_lambda: self.rqr_lambda,
            width_norm: self.width_norm,
            smooth_coverage: self.smooth_coverage,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return param_err("epochs must be at least 1");
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return param_err("lr and weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return param_err(format!("dropout_p = {} must lie in [0, 1)", self.dropout_p));
        }
        if self.mc_passes < 2 {
            return param_err("mc_passes must be at least 2");
        }
        self.loss_config().validate()?;
        let ok = match self.loss_kind {
            LossKind::Sqr => self.model_variant == Variant::SqrHead,
            LossKind::MseMcDropout => self.model_variant == Variant::Point,
            _ => self.model_variant.has_bounds(),
        };
        if !ok {
            return param_err(format!(
                "loss {} cannot train model {}",
                self.loss_kind.name(),
                self.model_variant.name()
            ));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            schedule: self.schedule,
            decoupled: self.decoupled_weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Metrics on each of the three masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: MetricsReport,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

impl SplitMetrics {
    pub fn get(&self, kind: MaskKind) -> &MetricsReport {
        match kind {
            MaskKind::Train => &self.train,
            MaskKind::Val => &self.val,
            MaskKind::Test => &self.test,
        }
    }
}

/// Per-epoch trajectory and final metrics of one training run.
///
/// Coverage and width are measured on the training mask before each update.
/// Point models trained for MC dropout have no intervals during training, so
/// their coverage and width entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub coverage: Vec<f64>,
    pub width: Vec<f64>,
    pub loss: Vec<f64>,
    pub grad_norm: Vec<f64>,
    /// Violation term of the joint loss (NaN for losses without one).
    pub violation: Vec<f64>,
    pub metrics: SplitMetrics,
    /// Fraction of test nodes whose lower bound exceeds the upper bound.
    pub test_crossing_rate: f64,
    pub config: TrainConfig,
}

impl RunRecord {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }
}

struct EpochOutcome {
    loss: Var,
    coverage: f64,
    width: f64,
    violation: f64,
}

fn mean_width(tape: &Tape<'_>, low: Var, up: Var, idx: &[usize]) -> f64 {
    let (l, u) = (tape.value(low).data(), tape.value(up).data());
    idx.iter().map(|&v| u[v] - l[v]).sum::<f64>() / idx.len() as f64
}

fn record_epoch<'g>(
    tape: &mut Tape<'g>,
    ds: &'g Dataset,
    params: &ParamStore,
    cfg: &TrainConfig,
    epoch: usize,
    train_idx: &[usize],
) -> Result<EpochOutcome> {
    let train = ds.masks.get(MaskKind::Train);
    let y = &ds.targets;
    let step_seed = rng::stream_key(cfg.seed, "train-step", epoch as u64);
    let lcfg = cfg.loss_config();

    if cfg.loss_kind == LossKind::Sqr {
        let loss = losses::sqr_loss_tape(tape, &ds.graph, &ds.features, y, train, params, step_seed)?;
        return Ok(EpochOutcome {
            loss,
            coverage: f64::NAN,
            width: f64::NAN,
            violation: f64::NAN,
        });
    }

    let x = tape.constant(ds.features.clone());
    let h = model::encode(tape, &ds.graph, x, params, cfg.dropout_p, true, step_seed)?;

    if cfg.loss_kind == LossKind::MseMcDropout {
        let pred = model::point_forward(tape, h, params)?;
        let loss = losses::mse_loss_tape(tape, pred, y, train)?;
        return Ok(EpochOutcome {
            loss,
            coverage: f64::NAN,
            width: f64::NAN,
            violation: f64::NAN,
        });
    }

    let (low, up) = model::bounds_forward(tape, h, params, cfg.model_variant)?;
    let width = mean_width(tape, low, up, train_idx);
    let (loss, coverage, violation) = match cfg.loss_kind {
        LossKind::Full | LossKind::CoverageOnly => {
            let lcfg = LossConfig {
                lambda_width: if cfg.loss_kind == LossKind::Full {
                    lcfg.lambda_width
                } else {
                    0.0
                },
                ..lcfg
            };
            let (loss, b) = losses::qpi_total_loss_tape(tape, low, up, y, train, &lcfg)?;
            (loss, b.empirical_coverage, b.violation_term)
        }
        LossKind::WidthOnly => {
            let terms = losses::qpi_terms_tape(tape, low, up, y, train, &lcfg)?;
            let v = tape.value(terms.violation).item();
            (tape.scale(terms.width, lcfg.lambda_width), terms.empirical_coverage, v)
        }
        LossKind::MseOnly => {
            let sum = tape.add(low, up)?;
            let center = tape.scale(sum, 0.5);
            let loss = losses::mse_loss_tape(tape, center, y, train)?;
            let iv = IntervalSet::new(tape.value(low).data().to_vec(), tape.value(up).data().to_vec())?;
            let c = losses::empirical_coverage(&iv, y, train)?;
            let v = losses::violation_loss(&iv, y, train)?;
            (loss, c, v)
        }
        LossKind::RqrAdj => {
            let loss = losses::rqr_adj_loss_tape(
                tape,
                low,
                up,
                y,
                train,
                cfg.alpha,
                cfg.rqr_lambda,
                cfg.gamma_order,
            )?;
            let iv = IntervalSet::new(tape.value(low).data().to_vec(), tape.value(up).data().to_vec())?;
            (loss, losses::empirical_coverage(&iv, y, train)?, f64::NAN)
        }
        LossKind::Sqr | LossKind::MseMcDropout => unreachable!("handled above"),
    };
    Ok(EpochOutcome {
        loss,
        coverage,
        width,
        violation,
    })
}

fn train_loop(ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    cfg.validate()?;
    let mcfg = ModelConfig {
        variant: cfg.model_variant,
        feat_dim: ds.feat_dim(),
        hidden: cfg.hidden,
        init_seed: cfg.seed,
    };
    let mut model = Model::new(mcfg)?;
    let mut state = AdamState::new(cfg.adam(), &model.params);
    let train_idx = ds.masks.indices(MaskKind::Train);
    let n = cfg.epochs;
    let (mut coverage, mut width, mut loss_hist, mut norms, mut viol) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for epoch in 0..n {
        let mut tape = Tape::new();
        let out = record_epoch(&mut tape, ds, &model.params, cfg, epoch, &train_idx)?;
        let loss = tape.value(out.loss).item();
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                epoch: epoch + 1,
                detail: format!(
                    "loss {loss}, coverage {}, width {}, violation {}",
                    out.coverage, out.width, out.violation
                ),
            });
        }
        tape.backward(out.loss, &mut model.params)?;
        let g = grad_norm(&model.params);
        adam_step(&mut model.params, &mut state)?;
        coverage.push(out.coverage);
        width.push(out.width);
        loss_hist.push(loss);
        norms.push(g);
        viol.push(out.violation);
    }
    let iv = predict(ds, &model, cfg)?;
    let metrics = evaluate(&iv, ds, cfg.alpha)?;
    let test = ds.masks.get(MaskKind::Test);
    let crossing = iv.crossing_count(test) as f64 / metrics.test.n_eval as f64;
    let record = RunRecord {
        coverage,
        width,
        loss: loss_hist,
        grad_norm: norms,
        violation: viol,
        metrics,
        test_crossing_rate: crossing,
        config: *cfg,
    };
    Ok((model, record))
}

/// Intervals of a trained model on every node of `ds`.
pub fn predict(ds: &Dataset, model: &Model, cfg: &TrainConfig) -> Result<IntervalSet> {
    match model.config.variant {
        Variant::Point => model::mc_dropout_interval(
            &ds.graph,
            &ds.features,
            &model.params,
            cfg.mc_passes,
            cfg.dropout_p,
            cfg.t_mult,
            rng::stream_key(cfg.seed, "mc-eval", 0),
        ),
        _ => model::predict_intervals(&ds.graph, &ds.features, model, cfg.alpha, cfg.seed),
    }
}

pub fn evaluate(iv: &IntervalSet, ds: &Dataset, alpha: f64) -> Result<SplitMetrics> {
    let r = |k: MaskKind| metrics::report(iv, &ds.targets, ds.masks.get(k), alpha);
    Ok(SplitMetrics {
        train: r(MaskKind::Train)?,
        val: r(MaskKind::Val)?,
        test: r(MaskKind::Test)?,
    })
}

/// Train an interval-producing variant with one of the joint-loss kinds.
pub fn train_qpignn(ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    if cfg.loss_kind.is_baseline() {
        return param_err(format!("{} is a baseline loss; use train_baseline", cfg.loss_kind.name()));
    }
    train_loop(ds, cfg)
}

/// Train SQR, RQR-adj or the MC-dropout point model.
pub fn train_baseline(ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    match cfg.loss_kind.baseline_variant() {
        Some(v) if v == cfg.model_variant => train_loop(ds, cfg),
        Some(v) => param_err(format!(
            "{} trains {}, not {}",
            cfg.loss_kind.name(),
            v.name(),
            cfg.model_variant.name()
        )),
        None => param_err(format!("{} is not a baseline loss", cfg.loss_kind.name())),
    }
}

/// Dispatch on the loss kind.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunRecord)> {
    if cfg.loss_kind.is_baseline() {
        train_baseline(ds, cfg)
    } else {
        train_qpignn(ds, cfg)
    }
}
