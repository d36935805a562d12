use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use qpignn::graph::{self, Dataset, GraphSpec, PerturbKind, SplitKind};
use qpignn::harness::experiments::{self, ShiftSetup};
use qpignn::harness::output;
use qpignn::harness::theory::{self, FixedRule};
use qpignn::harness::{self, tuning, LossKind, TrainConfig};
use qpignn::metrics::MetricsRow;
use qpignn::model::{self, Model, Variant};
use qpignn::{Error, Result};

use crate::args::{Check, Cli, Command, DataArgs, Format, OutArgs, TrainArgs};

/// Width penalty of the structural-shift protocol.
const SHIFT_LAMBDA: f64 = 0.5;

struct Sink<'a> {
    args: &'a OutArgs,
}

impl<'a> Sink<'a> {
    fn open(args: &'a OutArgs, cli: &Cli, argv: &[String]) -> Result<Self> {
        fs::create_dir_all(&args.out)?;
        #[derive(Serialize)]
        struct Echo<'c> {
            argv: &'c [String],
            #[serde(flatten)]
            cli: &'c Cli,
        }
        let f = BufWriter::new(File::create(args.out.join("config.json"))?);
        output::write_json(f, &Echo { argv, cli })?;
        Ok(Sink { args })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.args.out.join(name)
    }

    /// Write `rows` as `<stem>.csv` or `<stem>.json`.
    fn rows<S: Serialize>(&self, stem: &str, rows: &[S]) -> Result<PathBuf> {
        match self.args.format {
            Format::Csv => {
                let p = self.path(&format!("{stem}.csv"));
                let mut f = BufWriter::new(File::create(&p)?);
                if !self.args.no_timestamp {
                    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                    writeln!(f, "# generated {secs}")?;
                }
                output::write_csv(&mut f, rows, true)?;
                f.flush()?;
                Ok(p)
            }
            Format::Json => {
                let p = self.path(&format!("{stem}.json"));
                output::write_json(BufWriter::new(File::create(&p)?), rows)?;
                Ok(p)
            }
        }
    }

    fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let p = self.path(name);
        output::write_json(BufWriter::new(File::create(&p)?), value)?;
        Ok(p)
    }
}

fn load_data(d: &DataArgs, seed: u64) -> Result<Dataset> {
    let seed = d.seed(seed);
    let split = d.split_spec(seed);
    match (&d.edges, &d.features, &d.targets) {
        (Some(e), Some(f), Some(t)) => graph::load_csv_with_split(e, f, t, d.header, &split),
        _ => {
            let g = GraphSpec::family_of_size(&d.graph, d.nodes)?.build(seed)?;
            let ds = graph::synth_dataset(&g, d.family, d.feat_dim, d.noise_sigma, seed)?;
            if split == graph::SplitSpec::random_default(seed) {
                Ok(ds)
            } else {
                ds.with_split(&split)
            }
        }
    }
}

fn dataset_name(d: &DataArgs) -> String {
    match &d.edges {
        Some(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        None => format!("{}-{}", d.graph, d.family.name()),
    }
}

fn model_name(cfg: &TrainConfig) -> String {
    match cfg.loss_kind {
        LossKind::Full => cfg.model_variant.name().to_string(),
        k => format!("{}+{}", cfg.model_variant.name(), k.name()),
    }
}

fn print_report(label: &str, r: &qpignn::metrics::MetricsReport) {
    println!(
        "{label}: picp={:.4} mpiw={:.4} nmpiw={:.4} winkler={:.4} cwc={:.4} (n={})",
        r.picp, r.mpiw, r.nmpiw, r.winkler, r.cwc, r.n_eval
    );
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::Gen { data, out } => {
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, 0)?;
            let h = data.header;
            graph::export_csv(&ds, &sink.path("edges.csv"), &sink.path("features.csv"), &sink.path("targets.csv"), h)?;
            println!("wrote {} nodes, {} edges to {}", ds.num_nodes(), ds.graph.num_edges(), out.out.display());
        }
        Command::Train { data, train, out } => {
            let cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            let (model, rec) = harness::train(&ds, &cfg)?;
            model.save(&sink.path("model.json"))?;
            sink.rows("trajectory", &output::trajectory_rows(&rec))?;
            let name = model_name(&cfg);
            let dsn = dataset_name(data);
            let rows: Vec<MetricsRow> = [("train", &rec.metrics.train), ("val", &rec.metrics.val), ("test", &rec.metrics.test)]
                .iter()
                .map(|(split, r)| MetricsRow::new(&format!("train-{}-s{}-{split}", name, cfg.seed), &dsn, &name, cfg.lambda_width, cfg.seed, r))
                .collect();
            sink.rows("metrics", &rows)?;
            if let Ok(conv) = theory::convergence_check(&rec) {
                sink.json("convergence.json", &conv)?;
                println!("{}", conv.message);
            }
            print_report("test", &rec.metrics.test);
        }
        Command::Eval { model: path, data, train, out } => {
            let m = Model::load(path)?;
            let mut cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            cfg.model_variant = m.config.variant;
            if m.config.variant == Variant::Point && train.dropout_p.is_none() {
                cfg.dropout_p = model::DEFAULT_MC_DROPOUT;
            }
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            if ds.feat_dim() != m.config.feat_dim {
                return Err(Error::Shape(format!(
                    "checkpoint expects {} features, dataset has {}",
                    m.config.feat_dim,
                    ds.feat_dim()
                )));
            }
            let iv = harness::predict(&ds, &m, &cfg)?;
            let sm = harness::evaluate(&iv, &ds, cfg.alpha)?;
            let name = m.config.variant.name().to_string();
            let dsn = dataset_name(data);
            let rows: Vec<MetricsRow> = [("train", &sm.train), ("val", &sm.val), ("test", &sm.test)]
                .iter()
                .map(|(split, r)| MetricsRow::new(&format!("eval-{name}-{split}"), &dsn, &name, cfg.lambda_width, cfg.seed, r))
                .collect();
            sink.rows("metrics", &rows)?;
            #[derive(Serialize)]
            struct NodeRow {
                node: usize,
                low: f64,
                up: f64,
                target: f64,
            }
            let nodes: Vec<NodeRow> = (0..iv.len())
                .map(|v| NodeRow {
                    node: v,
                    low: iv.low[v],
                    up: iv.up[v],
                    target: ds.targets[v],
                })
                .collect();
            sink.rows("intervals", &nodes)?;
            print_report("test", &sm.test);
        }
        Command::Sweep { grid, tune, bounds, budget, data, train, out } => {
            let cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            let res = if *tune {
                tuning::lambda_tune(&ds, &cfg, *bounds, *budget, out.jobs)?
            } else {
                tuning::lambda_sweep(&ds, &cfg, grid, out.jobs)?
            };
            sink.rows("sweep", &output::sweep_rows(&res))?;
            let c = res.chosen();
            println!("chosen lambda={} (val picp={:.4}, val mpiw={:.4})", c.lambda, c.val.picp, c.val.mpiw);
        }
        Command::Ablate { seeds, data, train, out } => {
            let cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            let rows = experiments::ablation_suite(&ds, &cfg, &experiments::ABLATION_CONFIGS, seeds, out.jobs)?;
            sink.rows("ablation", &output::ablation_rows(&rows, &dataset_name(data), cfg.lambda_width))?;
            for r in &rows {
                println!("{:<24} picp={:.4} mpiw={:.4} cwc={:.4}", r.label(), r.mean.picp, r.mean.mpiw, r.mean.cwc);
            }
        }
        Command::Robust { feature_noise, target_noise, edge_dropout, data, train, out } => {
            let cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            let levels = vec![
                (PerturbKind::FeatureNoise, feature_noise.clone()),
                (PerturbKind::TargetNoise, target_noise.clone()),
                (PerturbKind::EdgeDropout, edge_dropout.clone()),
            ];
            let t = experiments::robustness_suite(&ds, &cfg, &levels, out.jobs)?;
            sink.rows("robustness", &output::robustness_rows(&t, &dataset_name(data), cfg.lambda_width, cfg.seed))?;
            print_report("clean", &t.clean);
            for r in &t.rows {
                print_report(&format!("{} {}", r.kind.name(), r.level), &r.test);
            }
        }
        Command::Shift { families, runs, data, train, out } => {
            let cfg = train.to_config(SHIFT_LAMBDA)?;
            let sink = Sink::open(out, cli, argv)?;
            let setup = ShiftSetup {
                families: families.clone(),
                nodes: data.nodes,
                feature_family: data.family,
                feat_dim: data.feat_dim,
                noise_sigma: data.noise_sigma,
                runs: *runs,
            };
            let m = experiments::shift_matrix(&setup, &cfg, out.jobs)?;
            sink.rows("shift", &output::shift_rows(&m, cfg.lambda_width))?;
            for (i, src) in m.families.iter().enumerate() {
                let cells: Vec<String> = m.cells[i].iter().map(|c| format!("{:.3}", c.picp)).collect();
                println!("{src:<6} {}", cells.join(" "));
            }
        }
        Command::Splits { kinds, data, train, out } => {
            let cfg = train.to_config(harness::TrainConfig::default().lambda_width)?;
            let sink = Sink::open(out, cli, argv)?;
            let ds = load_data(data, cfg.seed)?;
            let kinds: Vec<SplitKind> = kinds.iter().map(|k| k.0).collect();
            let rows = experiments::split_experiment(&ds, &cfg, &kinds, data.ratios, out.jobs)?;
            sink.rows("splits", &output::split_rows(&rows, &dataset_name(data), cfg.lambda_width, cfg.seed))?;
            for r in &rows {
                print_report(r.kind.name(), &r.test);
            }
        }
        Command::Theory { check, n, delta, eps, sigma, trials, data, train, out } => {
            let sink = Sink::open(out, cli, argv)?;
            run_theory(&sink, *check, *n, *delta, *eps, *sigma, *trials, data, train)?;
        }
        Command::Report { input, out } => {
            let sink = Sink::open(out, cli, argv)?;
            let rows = summarize_dir(input)?;
            sink.rows("report", &rows)?;
            for r in &rows {
                println!("{:<20} {:<32} n={:<3} picp={:.4} mpiw={:.4}", r.file, r.group, r.count, r.picp_mean, r.mpiw_mean);
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_theory(
    sink: &Sink,
    check: Check,
    n: usize,
    delta: f64,
    eps: f64,
    sigma: f64,
    trials: usize,
    data: &DataArgs,
    train: &TrainArgs,
) -> Result<()> {
    match check {
        Check::Hoeffding => {
            let e = theory::hoeffding_epsilon(n, delta)?;
            println!("ε={e:.6}");
            sink.json("theory.json", &serde_json::json!({"check": "hoeffding", "n": n, "delta": delta, "epsilon": e}))?;
        }
        Check::Mcdiarmid => {
            let p = theory::mcdiarmid_prob(n, eps)?;
            println!("P={p:.6}");
            sink.json("theory.json", &serde_json::json!({"check": "mcdiarmid", "n": n, "eps": eps, "prob": p}))?;
        }
        Check::Gaussian => {
            let alpha = train.alpha;
            let d = theory::gaussian_optimal_halfwidth(sigma, alpha)?;
            println!("d*={d:.6}");
            sink.json("theory.json", &serde_json::json!({"check": "gaussian", "sigma": sigma, "alpha": alpha, "half_width": d}))?;
        }
        Check::Concentration => {
            let rule = FixedRule {
                half_width: theory::gaussian_optimal_halfwidth(sigma, train.alpha)?,
                sigma,
            };
            let rep = theory::concentration_check(&rule, n, trials, delta, train.seed)?;
            println!(
                "{}: exceedance {:.4} (allowed {:.4}), std ratio {:.3}",
                if rep.passes() { "PASS" } else { "FAIL" },
                rep.exceedance,
                rep.allowed_exceedance,
                rep.std_ratio
            );
            sink.json("theory.json", &rep)?;
        }
        Check::Convergence => {
            let cfg = train.to_config(TrainConfig::default().lambda_width)?;
            let ds = load_data(data, cfg.seed)?;
            let (_, rec) = harness::train(&ds, &cfg)?;
            sink.rows("trajectory", &output::trajectory_rows(&rec))?;
            let rep = theory::convergence_check(&rec)?;
            println!("{}: {}", if rep.passes() { "PASS" } else { "FAIL" }, rep.message);
            sink.json("theory.json", &rep)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow {
    file: String,
    group: String,
    count: usize,
    picp_mean: f64,
    mpiw_mean: f64,
}

const GROUP_COLUMNS: [&str; 6] = ["experiment", "model", "kind", "level", "source_family", "target_family"];

/// Mean PICP and MPIW per row group of every CSV in `dir` that has both columns.
fn summarize_dir(dir: &Path) -> Result<Vec<ReportRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&path)?;
        let headers = rd.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(ip), Some(im)) = (col("picp"), col("mpiw")) else {
            continue;
        };
        let keys: Vec<usize> = GROUP_COLUMNS.iter().filter_map(|c| col(c)).collect();
        let mut groups: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
            let key: Vec<&str> = keys.iter().filter_map(|&i| rec.get(i)).filter(|s| !s.is_empty()).collect();
            let g = groups.entry(key.join("/")).or_insert((0, 0.0, 0.0));
            g.0 += 1;
            g.1 += parse(ip);
            g.2 += parse(im);
        }
        let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.extend(groups.into_iter().map(|(group, (count, p, m))| ReportRow {
            file: file.clone(),
            group,
            count,
            picp_mean: p / count as f64,
            mpiw_mean: m / count as f64,
        }));
    }
    Ok(out)
}
