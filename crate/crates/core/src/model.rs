//! GraphSAGE encoder and the interval heads.
//!
//! Every model shares the same two-layer encoder
//! `H = relu(L2(relu(L1(X))))` with `L(X) = X W_self + mean_nb(X) W_neigh + b`.
//! The [`Variant`] picks what sits on top of `H`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Checkpoint, ParamStore, Tape, Tensor, Var};
use crate::error::{param_err, shape_err, Error, Result};
use crate::graph::Graph;
use crate::rng;

pub const DEFAULT_HIDDEN: usize = 64;
/// Standard-normal 95th percentile, the MC-dropout multiplier for 90% intervals.
pub const DEFAULT_T_MULT: f64 = 1.6449;
pub const DEFAULT_MC_PASSES: usize = 100;
pub const DEFAULT_MC_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Point head plus softplus half-width head.
    DualHead,
    /// Point head plus one learnable margin shared by every node.
    FixedMargin,
    /// One 2-output map read directly as (low, up).
    SingleHead,
    /// Quantile regressor with the level appended as an input column.
    SqrHead,
    /// Same shape as `SingleHead`, trained with the RQR objective.
    RqrHead,
    /// Point head only; intervals come from MC dropout.
    Point,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::DualHead,
        Variant::FixedMargin,
        Variant::SingleHead,
        Variant::SqrHead,
        Variant::RqrHead,
        Variant::Point,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DualHead => "dual_head",
            Variant::FixedMargin => "fixed_margin",
            Variant::SingleHead => "single_head",
            Variant::SqrHead => "sqr_head",
            Variant::RqrHead => "rqr_head",
            Variant::Point => "point",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Parameter(format!("unknown model variant '{s}'")))
    }

    /// Whether this variant yields (low, up) directly from the encoder output.
    pub fn has_bounds(self) -> bool {
        !matches!(self, Variant::SqrHead | Variant::Point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Feature columns of the dataset, before the extra level column of SQR.
    pub feat_dim: usize,
    pub hidden: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, feat_dim: usize, init_seed: u64) -> Self {
        ModelConfig {
            variant,
            feat_dim,
            hidden: DEFAULT_HIDDEN,
            init_seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.variant {
            Variant::SqrHead => self.feat_dim + 1,
            _ => self.feat_dim,
        }
    }

    /// Names and shapes of every parameter of this configuration.
    pub fn param_shapes(&self) -> Vec<(&'static str, usize, usize)> {
        let (d, h) = (self.input_dim(), self.hidden);
        let mut shapes = vec![
            ("enc.l1.w_self", d, h),
            ("enc.l1.w_neigh", d, h),
            ("enc.l1.bias", 1, h),
            ("enc.l2.w_self", h, h),
            ("enc.l2.w_neigh", h, h),
            ("enc.l2.bias", 1, h),
        ];
        match self.variant {
            Variant::DualHead => {
                shapes.extend([
                    ("head.pred.w", h, 1),
                    ("head.pred.b", 1, 1),
                    ("head.width.w", h, 1),
                    ("head.width.b", 1, 1),
                ]);
            }
            Variant::FixedMargin => {
                shapes.extend([("head.pred.w", h, 1), ("head.pred.b", 1, 1), ("head.margin", 1, 1)]);
            }
            Variant::SingleHead | Variant::RqrHead => {
                shapes.extend([("head.bounds.w", h, 2), ("head.bounds.b", 1, 2)]);
            }
            Variant::SqrHead | Variant::Point => {
                shapes.extend([("head.pred.w", h, 1), ("head.pred.b", 1, 1)]);
            }
        }
        shapes
    }

    fn validate(&self) -> Result<()> {
        if self.feat_dim == 0 || self.hidden == 0 {
            return param_err("feat_dim and hidden must be positive");
        }
        Ok(())
    }
}

/// Glorot-uniform weights seeded by parameter name; biases and the margin start at zero.
pub fn init_params(cfg: &ModelConfig) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    for (name, rows, cols) in cfg.param_shapes() {
        let is_weight = name.ends_with(".w") || name.contains(".w_");
        let mut t = Tensor::zeros(rows, cols);
        if is_weight {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            let mut r = rng::stream(cfg.init_seed, name, 0);
            for x in t.data_mut() {
                *x = r.random_range(-a..a);
            }
        }
        store.insert(name, t);
    }
    Ok(store)
}

/// Parameters together with the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

#[derive(Serialize, Deserialize)]
struct SavedModel {
    config: ModelConfig,
    #[serde(flatten)]
    checkpoint: Checkpoint,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = init_params(&config)?;
        Ok(Model { config, params })
    }

    pub fn to_json(&self) -> Result<String> {
        let saved = SavedModel {
            config: self.config,
            checkpoint: self.params.to_checkpoint(),
        };
        Ok(serde_json::to_string_pretty(&saved)?)
    }

    /// Parse a checkpoint; every tensor must match the shapes implied by its config.
    pub fn from_json(s: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(s)?;
        let mut model = Model::new(saved.config)?;
        saved.checkpoint.restore_into(&mut model.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Model::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-node interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub low: Vec<f64>,
    pub up: Vec<f64>,
}

impl IntervalSet {
    pub fn new(low: Vec<f64>, up: Vec<f64>) -> Result<Self> {
        if low.len() != up.len() {
            return shape_err(format!("{} lower bounds vs {} upper", low.len(), up.len()));
        }
        Ok(IntervalSet { low, up })
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    pub fn width(&self, v: usize) -> f64 {
        self.up[v] - self.low[v]
    }

    pub fn center(&self, v: usize) -> f64 {
        0.5 * (self.low[v] + self.up[v])
    }

    pub fn covers(&self, v: usize, y: f64) -> bool {
        self.low[v] <= y && y <= self.up[v]
    }

    /// Nodes in `mask` whose lower bound exceeds the upper bound.
    pub fn crossing_count(&self, mask: &[bool]) -> usize {
        (0..self.len()).filter(|&v| mask[v] && self.low[v] > self.up[v]).count()
    }
}

/// Record the encoder on `tape`. `x` must have one row per node.
///
/// With `dropout_p > 0` and `train_mode`, dropout follows each relu, each
/// layer drawing its mask from its own stream under `seed`.
pub fn encode<'g>(
    tape: &mut Tape<'g>,
    graph: &'g Graph,
    x: Var,
    params: &ParamStore,
    dropout_p: f64,
    train_mode: bool,
    seed: u64,
) -> Result<Var> {
    let xv = tape.value(x);
    if xv.rows() != graph.num_nodes() {
        return shape_err(format!(
            "features have {} rows for {} nodes",
            xv.rows(),
            graph.num_nodes()
        ));
    }
    let expected = params.value("enc.l1.w_self")?.rows();
    if xv.cols() != expected {
        return shape_err(format!("features have {} columns, encoder expects {expected}", xv.cols()));
    }
    let mut h = x;
    for (layer, prefix) in ["enc.l1", "enc.l2"].into_iter().enumerate() {
        let w_self = tape.param(params, &format!("{prefix}.w_self"))?;
        let w_neigh = tape.param(params, &format!("{prefix}.w_neigh"))?;
        let bias = tape.param(params, &format!("{prefix}.bias"))?;
        let own = tape.matmul(h, w_self)?;
        let agg = tape.mean_aggregate(graph, h)?;
        let nb = tape.matmul(agg, w_neigh)?;
        let sum = tape.add(own, nb)?;
        let pre = tape.add_row_bias(sum, bias)?;
        h = tape.relu(pre);
        let layer_seed = rng::stream_key(seed, "encoder-dropout", layer as u64);
        h = tape.dropout(h, dropout_p, layer_seed, train_mode)?;
    }
    Ok(h)
}

fn linear(tape: &mut Tape<'_>, h: Var, params: &ParamStore, prefix: &str) -> Result<Var> {
    let w = tape.param(params, &format!("{prefix}.w"))?;
    let b = tape.param(params, &format!("{prefix}.b"))?;
    let z = tape.matmul(h, w)?;
    tape.add_row_bias(z, b)
}

/// Point prediction `y_hat` (n x 1).
pub fn point_forward(tape: &mut Tape<'_>, h: Var, params: &ParamStore) -> Result<Var> {
    linear(tape, h, params, "head.pred")
}

/// Point prediction and positive half-width, each n x 1.
pub fn qpi_forward(tape: &mut Tape<'_>, h: Var, params: &ParamStore) -> Result<(Var, Var)> {
    let y_hat = linear(tape, h, params, "head.pred")?;
    let raw = linear(tape, h, params, "head.width")?;
    let d_hat = tape.softplus(raw);
    Ok((y_hat, d_hat))
}

/// `[y_hat - d_hat, y_hat + d_hat]`.
pub fn intervals(y_hat: &[f64], d_hat: &[f64]) -> Result<IntervalSet> {
    if y_hat.len() != d_hat.len() {
        return shape_err(format!("{} predictions vs {} half-widths", y_hat.len(), d_hat.len()));
    }
    if let Some(v) = d_hat.iter().position(|&d| !(d >= 0.0)) {
        return Err(Error::Contract(format!("half-width {} at node {v} is negative", d_hat[v])));
    }
    let low = y_hat.iter().zip(d_hat).map(|(y, d)| y - d).collect();
    let up = y_hat.iter().zip(d_hat).map(|(y, d)| y + d).collect();
    Ok(IntervalSet { low, up })
}

/// Lower and upper bounds (each n x 1) recorded on the tape for any variant
/// that produces intervals from `H` alone.
pub fn bounds_forward(
    tape: &mut Tape<'_>,
    h: Var,
    params: &ParamStore,
    variant: Variant,
) -> Result<(Var, Var)> {
    match variant {
        Variant::DualHead => {
            let (y_hat, d_hat) = qpi_forward(tape, h, params)?;
            Ok((tape.sub(y_hat, d_hat)?, tape.add(y_hat, d_hat)?))
        }
        Variant::FixedMargin => {
            let y_hat = linear(tape, h, params, "head.pred")?;
            let raw = tape.param(params, "head.margin")?;
            let margin = tape.softplus(raw);
            let n = tape.value(y_hat).rows();
            let m = tape.broadcast(margin, n, 1)?;
            Ok((tape.sub(y_hat, m)?, tape.add(y_hat, m)?))
        }
        Variant::SingleHead | Variant::RqrHead => {
            let out = linear(tape, h, params, "head.bounds")?;
            Ok((tape.column(out, 0)?, tape.column(out, 1)?))
        }
        Variant::SqrHead | Variant::Point => Err(Error::Contract(format!(
            "variant {} does not produce bounds from a single pass",
            variant.name()
        ))),
    }
}

/// Deterministic intervals of a bounds-producing variant.
pub fn variant_forward(graph: &Graph, x: &Tensor, model: &Model) -> Result<IntervalSet> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let h = encode(&mut tape, graph, xv, &model.params, 0.0, false, 0)?;
    let (low, up) = bounds_forward(&mut tape, h, &model.params, model.config.variant)?;
    IntervalSet::new(tape.value(low).data().to_vec(), tape.value(up).data().to_vec())
}

/// `x` with one extra column holding each node's quantile level.
pub fn append_level(x: &Tensor, taus: &[f64]) -> Result<Tensor> {
    x.hcat(&Tensor::column(taus.to_vec()))
}

/// Predicted `tau`-quantile for every node.
pub fn sqr_forward(graph: &Graph, x: &Tensor, tau: f64, params: &ParamStore) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return param_err(format!("quantile level {tau} must lie in (0, 1)"));
    }
    let xa = append_level(x, &vec![tau; x.rows()])?;
    let mut tape = Tape::new();
    let xv = tape.constant(xa);
    let h = encode(&mut tape, graph, xv, params, 0.0, false, 0)?;
    let q = point_forward(&mut tape, h, params)?;
    Ok(tape.value(q).data().to_vec())
}

/// SQR interval from the `alpha/2` and `1 - alpha/2` quantiles, left unsorted.
pub fn sqr_interval(graph: &Graph, x: &Tensor, alpha: f64, params: &ParamStore) -> Result<IntervalSet> {
    let low = sqr_forward(graph, x, alpha / 2.0, params)?;
    let up = sqr_forward(graph, x, 1.0 - alpha / 2.0, params)?;
    IntervalSet::new(low, up)
}

/// `mu +- t_mult * sigma` per node from stochastic passes (rows = passes),
/// with `sigma` the sample standard deviation.
pub fn interval_from_samples(samples: &[Vec<f64>], t_mult: f64) -> Result<IntervalSet> {
    let t = samples.len();
    if t < 2 {
        return param_err(format!("need at least 2 samples, got {t}"));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return shape_err("samples have unequal lengths");
    }
    let mut low = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for v in 0..n {
        let mu = samples.iter().map(|s| s[v]).sum::<f64>() / t as f64;
        let var = samples.iter().map(|s| (s[v] - mu).powi(2)).sum::<f64>() / (t - 1) as f64;
        let half = t_mult * var.sqrt();
        low.push(mu - half);
        up.push(mu + half);
    }
    Ok(IntervalSet { low, up })
}

/// MC-dropout interval from `passes` stochastic forward passes of a point model.
pub fn mc_dropout_interval(
    graph: &Graph,
    x: &Tensor,
    params: &ParamStore,
    passes: usize,
    p: f64,
    t_mult: f64,
    seed: u64,
) -> Result<IntervalSet> {
    if passes < 2 {
        return param_err(format!("MC dropout needs at least 2 passes, got {passes}"));
    }
    let mut samples = Vec::with_capacity(passes);
    for t in 0..passes {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let pass_seed = rng::stream_key(seed, "mc-pass", t as u64);
        let h = encode(&mut tape, graph, xv, params, p, true, pass_seed)?;
        let y = point_forward(&mut tape, h, params)?;
        samples.push(tape.value(y).data().to_vec());
    }
    interval_from_samples(&samples, t_mult)
}

/// Intervals for any trained model, using the given miscoverage for SQR and
/// the MC-dropout defaults for point models.
pub fn predict_intervals(graph: &Graph, x: &Tensor, model: &Model, alpha: f64, seed: u64) -> Result<IntervalSet> {
    match model.config.variant {
        Variant::SqrHead => sqr_interval(graph, x, alpha, &model.params),
        Variant::Point => mc_dropout_interval(
            graph,
            x,
            &model.params,
            DEFAULT_MC_PASSES,
            DEFAULT_MC_DROPOUT,
            DEFAULT_T_MULT,
            seed,
        ),
        _ => variant_forward(graph, x, model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_chain, gen_er};

    fn features(n: usize, d: usize, seed: u64) -> Tensor {
        let mut r = rng::stream(seed, "test-x", 0);
        let data = (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(n, d, data).unwrap()
    }

    fn forward_h(g: &Graph, x: &Tensor, params: &ParamStore) -> Tensor {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let h = encode(&mut tape, g, xv, params, 0.0, false, 0).unwrap();
        tape.value(h).clone()
    }

    #[test]
    fn zero_parameters_give_zero_embedding() {
        let g = gen_chain(4).unwrap();
        let mut model = Model::new(ModelConfig::new(Variant::DualHead, 3, 1)).unwrap();
        for (_, p) in model.params.iter_mut() {
            p.value = p.value.map(|_| 0.0);
        }
        let h = forward_h(&g, &features(4, 3, 0), &model.params);
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert_eq!(h.shape(), (4, DEFAULT_HIDDEN));
    }

    #[test]
    fn isolated_node_ignores_neighbor_weights() {
        let g = Graph::empty(1);
        let x = features(1, 3, 2);
        let model = Model::new(ModelConfig::new(Variant::DualHead, 3, 1)).unwrap();
        let base = forward_h(&g, &x, &model.params);
        let mut other = model.params.clone();
        for name in ["enc.l1.w_neigh", "enc.l2.w_neigh"] {
            other.get_mut(name).unwrap().value = other.value(name).unwrap().map(|v| v * 3.0 + 1.0);
        }
        assert_eq!(forward_h(&g, &x, &other), base);
    }

    #[test]
    fn zero_width_head_gives_ln2() {
        let g = gen_er(10, 0.3, 1).unwrap();
        let mut model = Model::new(ModelConfig::new(Variant::DualHead, 2, 4)).unwrap();
        model.params.get_mut("head.width.w").unwrap().value = Tensor::zeros(DEFAULT_HIDDEN, 1);
        let mut tape = Tape::new();
        let xv = tape.constant(features(10, 2, 3));
        let h = encode(&mut tape, &g, xv, &model.params, 0.0, false, 0).unwrap();
        let (_, d) = qpi_forward(&mut tape, h, &model.params).unwrap();
        for &v in tape.value(d).data() {
            assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn width_head_does_not_touch_prediction() {
        let g = gen_er(12, 0.3, 5).unwrap();
        let x = features(12, 3, 5);
        let model = Model::new(ModelConfig::new(Variant::DualHead, 3, 9)).unwrap();
        let run = |p: &ParamStore| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let h = encode(&mut tape, &g, xv, p, 0.0, false, 0).unwrap();
            let (y, d) = qpi_forward(&mut tape, h, p).unwrap();
            (tape.value(y).clone(), tape.value(d).clone())
        };
        let (y0, d0) = run(&model.params);
        let mut p = model.params.clone();
        p.get_mut("head.width.w").unwrap().value = p.value("head.width.w").unwrap().map(|v| v - 0.7);
        let (y1, d1) = run(&p);
        assert_eq!(y0, y1);
        assert_ne!(d0, d1);
        let mut p = model.params.clone();
        p.get_mut("head.pred.b").unwrap().value = Tensor::scalar(2.0);
        let (_, d2) = run(&p);
        assert_eq!(d0, d2);
    }

    #[test]
    fn intervals_contract() {
        let iv = intervals(&[1.0], &[0.5]).unwrap();
        assert_eq!((iv.low[0], iv.up[0]), (0.5, 1.5));
        let iv = intervals(&[2.0], &[0.0]).unwrap();
        assert_eq!(iv.low[0], iv.up[0]);
        assert!(matches!(intervals(&[0.0], &[-0.1]), Err(Error::Contract(_))));
        assert!(intervals(&[0.0, 1.0], &[0.1]).is_err());
    }

    #[test]
    fn fixed_margin_starts_at_ln2_everywhere() {
        let g = gen_er(15, 0.2, 2).unwrap();
        let x = features(15, 4, 1);
        let model = Model::new(ModelConfig::new(Variant::FixedMargin, 4, 3)).unwrap();
        let iv = variant_forward(&g, &x, &model).unwrap();
        for v in 0..15 {
            assert!((iv.width(v) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_head_bounds_are_raw_columns() {
        let g = gen_er(30, 0.2, 2).unwrap();
        let x = features(30, 4, 1);
        let model = Model::new(ModelConfig::new(Variant::SingleHead, 4, 11)).unwrap();
        let iv = variant_forward(&g, &x, &model).unwrap();
        // With random weights some nodes cross; the count is reported, never fixed up.
        let crossed = iv.crossing_count(&[true; 30]);
        assert!(crossed <= 30);
        assert_eq!(iv.len(), 30);
    }

    #[test]
    fn sqr_level_validation_and_repeatability() {
        let g = gen_er(10, 0.3, 1).unwrap();
        let x = features(10, 2, 1);
        let model = Model::new(ModelConfig::new(Variant::SqrHead, 2, 1)).unwrap();
        assert!(sqr_forward(&g, &x, 0.0, &model.params).is_err());
        assert!(sqr_forward(&g, &x, 1.0, &model.params).is_err());
        let a = sqr_forward(&g, &x, 0.3, &model.params).unwrap();
        let b = sqr_forward(&g, &x, 0.3, &model.params).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sqr_forward(&g, &x, 0.7, &model.params).unwrap());
    }

    #[test]
    fn mc_dropout_without_dropout_is_degenerate() {
        let g = gen_er(10, 0.3, 1).unwrap();
        let x = features(10, 2, 1);
        let model = Model::new(ModelConfig::new(Variant::Point, 2, 1)).unwrap();
        let iv = mc_dropout_interval(&g, &x, &model.params, 5, 0.0, DEFAULT_T_MULT, 3).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let h = encode(&mut tape, &g, xv, &model.params, 0.0, false, 0).unwrap();
        let y = point_forward(&mut tape, h, &model.params).unwrap();
        for v in 0..10 {
            assert!(iv.width(v).abs() < 1e-12);
            assert!((iv.low[v] - tape.value(y).data()[v]).abs() < 1e-12);
        }
        assert!(mc_dropout_interval(&g, &x, &model.params, 1, 0.2, 1.0, 0).is_err());
    }

    #[test]
    fn mc_dropout_is_reproducible() {
        let g = gen_er(10, 0.3, 1).unwrap();
        let x = features(10, 2, 1);
        let model = Model::new(ModelConfig::new(Variant::Point, 2, 1)).unwrap();
        let a = mc_dropout_interval(&g, &x, &model.params, 10, 0.2, DEFAULT_T_MULT, 3).unwrap();
        let b = mc_dropout_interval(&g, &x, &model.params, 10, 0.2, DEFAULT_T_MULT, 3).unwrap();
        assert_eq!(a, b);
        assert!((0..10).any(|v| a.width(v) > 0.0));
    }

    #[test]
    fn samples_to_interval_arithmetic() {
        // Two passes {-1, 1}: mean 0, sample std sqrt(2).
        let iv = interval_from_samples(&[vec![-1.0], vec![1.0]], 1.645).unwrap();
        let s = 2f64.sqrt();
        assert!((iv.up[0] - 1.645 * s).abs() < 1e-12);
        assert!((iv.low[0] + 1.645 * s).abs() < 1e-12);
        // Samples with mean 0 and sample std 1.
        let samples = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let iv = interval_from_samples(&samples, 1.645).unwrap();
        assert!((iv.low[0] + 1.645).abs() < 1e-12 && (iv.up[0] - 1.645).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let model = Model::new(ModelConfig::new(Variant::DualHead, 3, 7)).unwrap();
        let back = Model::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.config, model.config);
        for (name, p) in model.params.iter() {
            assert_eq!(back.params.value(name).unwrap(), &p.value);
        }
        let mut json: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        json["params"]["head.pred.w"]["shape"] = serde_json::json!([3, 1]);
        assert!(Model::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn init_is_seeded_by_name() {
        let a = init_params(&ModelConfig::new(Variant::DualHead, 3, 1)).unwrap();
        let b = init_params(&ModelConfig::new(Variant::DualHead, 3, 1)).unwrap();
        let c = init_params(&ModelConfig::new(Variant::DualHead, 3, 2)).unwrap();
        assert_eq!(a.value("enc.l1.w_self").unwrap(), b.value("enc.l1.w_self").unwrap());
        assert_ne!(a.value("enc.l1.w_self").unwrap(), c.value("enc.l1.w_self").unwrap());
        let bound = (6.0 / (3.0 + 64.0_f64)).sqrt();
        assert!(a.value("enc.l1.w_self").unwrap().data().iter().all(|v| v.abs() < bound));
        assert!(a.value("enc.l1.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }
}
