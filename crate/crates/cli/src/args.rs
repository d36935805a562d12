use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qpignn::graph::{FeatureFamily, SplitKind, SplitSpec};
use qpignn::harness::{LossKind, TrainConfig};
use qpignn::losses::WidthNorm;
use qpignn::model::{self, Variant};
use qpignn::optim::LrSchedule;

#[derive(Debug, Parser, Serialize)]
#[command(name = "qpignn", version, about = "Quantile-free prediction intervals for graph regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic dataset and export it as CSV.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train one model; writes the trajectory, metrics and a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Score a saved checkpoint on a dataset.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train across a grid of width penalties, or search one with --tune.
    Sweep {
        /// Comma-separated penalty grid.
        #[arg(long, value_delimiter = ',', default_values_t = qpignn::harness::tuning::DEFAULT_GRID.to_vec())]
        grid: Vec<f64>,
        /// Search inside --bounds instead of evaluating the grid.
        #[arg(long)]
        tune: bool,
        #[arg(long, value_parser = parse_pair, default_value = "0.01,1")]
        bounds: (f64, f64),
        #[arg(long, default_value_t = qpignn::harness::tuning::DEFAULT_BUDGET)]
        budget: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Architecture and objective ablation over several seeds.
    Ablate {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Retrain under feature noise, target noise and edge dropout.
    Robust {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3])]
        feature_noise: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3])]
        target_noise: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3])]
        edge_dropout: Vec<f64>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train on one graph family, evaluate on the others.
    Shift {
        #[arg(long, value_delimiter = ',', default_values_t = ["ba", "er", "grid", "tree", "chain"].map(String::from).to_vec())]
        families: Vec<String>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare random, degree and community splits.
    Splits {
        #[arg(long, value_delimiter = ',', value_parser = parse_split, default_values_t = vec![SplitName(SplitKind::Random), SplitName(SplitKind::Degree), SplitName(SplitKind::Community)])]
        kinds: Vec<SplitName>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Closed-form bounds and empirical checks.
    Theory {
        #[arg(long, value_enum)]
        check: Check,
        /// Sample size for the concentration bounds.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Target standard deviation for the Gaussian checks.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Summarize every result CSV found in a directory.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Hoeffding,
    Mcdiarmid,
    Gaussian,
    Concentration,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Split kind wrapper so clap can print defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitName(pub SplitKind);

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.name())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Omit the leading `# generated` line from CSV outputs.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Independent runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Synthetic feature family: basic, gaussian, uniform or edge.
    #[arg(long, value_parser = parse_family, default_value = "gaussian")]
    pub family: FeatureFamily,
    /// Graph family: er, ba, grid, tree or chain.
    #[arg(long, default_value = "er")]
    pub graph: String,
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 8)]
    pub feat_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Seed for graph, data and split; defaults to --seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Edge list CSV (`src,dst`); load data from files instead of generating it.
    #[arg(long, requires_all = ["features", "targets"])]
    pub edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub targets: Option<PathBuf>,
    /// CSV files carry one header line.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_parser = parse_split, default_value = "random")]
    pub split: SplitName,
    /// Train, validation and test fractions.
    #[arg(long, value_parser = parse_triple, default_value = "0.6,0.2,0.2")]
    pub ratios: (f64, f64, f64),
}

impl DataArgs {
    pub fn seed(&self, train_seed: u64) -> u64 {
        self.data_seed.unwrap_or(train_seed)
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            kind: self.split.0,
            ratios: self.ratios,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Width penalty (0.05 by default, 0.5 for `shift`).
    #[arg(long, alias = "lambda")]
    pub lambda_width: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to the architecture the loss kind trains.
    #[arg(long, alias = "variant", value_parser = parse_variant)]
    pub model_variant: Option<Variant>,
    #[arg(long, alias = "loss", value_parser = parse_loss, default_value = "full")]
    pub loss_kind: LossKind,
    /// Defaults to 0.2 for mse_mc_dropout and 0 otherwise.
    #[arg(long, alias = "dropout")]
    pub dropout_p: Option<f64>,
    #[arg(long, default_value_t = model::DEFAULT_HIDDEN)]
    pub hidden: usize,
    #[arg(long, value_parser = parse_width_norm, default_value = "l1")]
    pub width_norm: WidthNorm,
    #[arg(long)]
    pub smooth_coverage: bool,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_order: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rqr_lambda: f64,
    #[arg(long, value_parser = parse_schedule, default_value = "constant")]
    pub schedule: LrSchedule,
    #[arg(long)]
    pub decoupled_weight_decay: bool,
    #[arg(long, default_value_t = model::DEFAULT_MC_PASSES)]
    pub mc_passes: usize,
    #[arg(long, default_value_t = model::DEFAULT_T_MULT)]
    pub t_mult: f64,
}

impl TrainArgs {
    pub fn to_config(&self, default_lambda: f64) -> qpignn::Result<TrainConfig> {
        let base = if self.loss_kind.is_baseline() {
            TrainConfig::baseline(self.loss_kind)?
        } else {
            TrainConfig::default()
        };
        let cfg = TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            alpha: self.alpha,
            lambda_width: self.lambda_width.unwrap_or(default_lambda),
            seed: self.seed,
            model_variant: self.model_variant.unwrap_or(base.model_variant),
            loss_kind: self.loss_kind,
            dropout_p: self.dropout_p.unwrap_or(base.dropout_p),
            hidden: self.hidden,
            width_norm: self.width_norm,
            smooth_coverage: self.smooth_coverage,
            gamma_order: self.gamma_order,
            rqr_lambda: self.rqr_lambda,
            schedule: self.schedule,
            decoupled_weight_decay: self.decoupled_weight_decay,
            mc_passes: self.mc_passes,
            t_mult: self.t_mult,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_family(s: &str) -> Result<FeatureFamily, String> {
    FeatureFamily::parse(s).map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    SplitKind::parse(s).map(SplitName).map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::parse(s).map_err(|e| e.to_string())
}

fn parse_width_norm(s: &str) -> Result<WidthNorm, String> {
    match s {
        "l1" => Ok(WidthNorm::L1),
        "l2" => Ok(WidthNorm::L2),
        other => Err(format!("unknown width norm '{other}' (expected l1 or l2)")),
    }
}

fn parse_schedule(s: &str) -> Result<LrSchedule, String> {
    match s {
        "constant" => Ok(LrSchedule::Constant),
        "inv_sqrt" | "inv-sqrt" => Ok(LrSchedule::InvSqrt),
        other => Err(format!("unknown schedule '{other}' (expected constant or inv_sqrt)")),
    }
}

fn parse_list(s: &str, k: usize) -> Result<Vec<f64>, String> {
    let xs: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<Result<_, _>>()?;
    if xs.len() != k {
        return Err(format!("expected {k} comma-separated numbers, got {}", xs.len()));
    }
    Ok(xs)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let xs = parse_list(s, 2)?;
    Ok((xs[0], xs[1]))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let xs = parse_list(s, 3)?;
    Ok((xs[0], xs[1], xs[2]))
}
