//! Flat row types for CSV / JSON output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::experiments::{AblationRow, RobustnessTable, ShiftMatrix, SplitRow};
use super::train::RunRecord;
use super::tuning::SweepResult;
use crate::error::Result;
use crate::metrics::MetricsReport;

/// Metrics columns shared by every experiment, plus the columns that locate a
/// row inside its experiment. Columns that do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub run_id: String,
    pub dataset: String,
    pub model: String,
    pub kind: String,
    pub level: Option<f64>,
    pub source_family: String,
    pub target_family: String,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub picp: f64,
    pub mpiw: f64,
    pub nmpiw: Option<f64>,
    pub mpe: Option<f64>,
    pub sharpness: Option<f64>,
    pub winkler: Option<f64>,
    pub cwc: Option<f64>,
    pub picp_std: Option<f64>,
    pub mpiw_std: Option<f64>,
}

impl ExperimentRow {
    fn blank(experiment: &str, dataset: &str, lambda: f64) -> Self {
        ExperimentRow {
            experiment: experiment.to_string(),
            run_id: String::new(),
            dataset: dataset.to_string(),
            model: String::new(),
            kind: String::new(),
            level: None,
            source_family: String::new(),
            target_family: String::new(),
            lambda,
            seed: None,
            picp: f64::NAN,
            mpiw: f64::NAN,
            nmpiw: None,
            mpe: None,
            sharpness: None,
            winkler: None,
            cwc: None,
            picp_std: None,
            mpiw_std: None,
        }
    }

    fn with_report(mut self, r: &MetricsReport) -> Self {
        self.picp = r.picp;
        self.mpiw = r.mpiw;
        self.nmpiw = Some(r.nmpiw);
        self.mpe = Some(r.mpe);
        self.sharpness = Some(r.sharpness);
        self.winkler = Some(r.winkler);
        self.cwc = Some(r.cwc);
        self
    }
}

pub fn ablation_rows(rows: &[AblationRow], dataset: &str, lambda: f64) -> Vec<ExperimentRow> {
    rows.iter()
        .map(|r| {
            let mut e = ExperimentRow::blank("ablation", dataset, lambda).with_report(&r.mean);
            e.run_id = format!("ablation-{}", r.label());
            e.model = r.variant.name().to_string();
            e.kind = r.loss_kind.name().to_string();
            e.picp_std = Some(r.std[0]);
            e.mpiw_std = Some(r.std[1]);
            e
        })
        .collect()
}

pub fn robustness_rows(t: &RobustnessTable, dataset: &str, lambda: f64, seed: u64) -> Vec<ExperimentRow> {
    let mut clean = ExperimentRow::blank("robustness", dataset, lambda).with_report(&t.clean);
    clean.run_id = "robust-clean".to_string();
    clean.model = "qpignn".to_string();
    clean.kind = "clean".to_string();
    clean.level = Some(0.0);
    clean.seed = Some(seed);
    let mut out = vec![clean];
    out.extend(t.rows.iter().map(|r| {
        let mut e = ExperimentRow::blank("robustness", dataset, lambda).with_report(&r.test);
        e.run_id = format!("robust-{}-{}", r.kind.name(), r.level);
        e.model = "qpignn".to_string();
        e.kind = r.kind.name().to_string();
        e.level = Some(r.level);
        e.seed = Some(seed);
        e
    }));
    out
}

pub fn shift_rows(m: &ShiftMatrix, lambda: f64) -> Vec<ExperimentRow> {
    let mut out = Vec::new();
    for (i, src) in m.families.iter().enumerate() {
        for (j, dst) in m.families.iter().enumerate() {
            let c = &m.cells[i][j];
            let mut e = ExperimentRow::blank("shift", dst, lambda);
            e.run_id = format!("shift-{src}-{dst}");
            e.model = "qpignn".to_string();
            e.kind = if i == j { "in_domain" } else { "transfer" }.to_string();
            e.source_family = src.clone();
            e.target_family = dst.clone();
            e.picp = c.picp;
            e.mpiw = c.mpiw;
            e.picp_std = Some(c.picp_std);
            e.mpiw_std = Some(c.mpiw_std);
            out.push(e);
        }
    }
    out
}

pub fn split_rows(rows: &[SplitRow], dataset: &str, lambda: f64, seed: u64) -> Vec<ExperimentRow> {
    rows.iter()
        .map(|r| {
            let mut e = ExperimentRow::blank("splits", dataset, lambda).with_report(&r.test);
            e.run_id = format!("split-{}", r.kind.name());
            e.model = "qpignn".to_string();
            e.kind = r.kind.name().to_string();
            e.seed = Some(seed);
            e
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub val_picp: f64,
    pub val_mpiw: f64,
    pub test_picp: f64,
    pub test_mpiw: f64,
    pub test_cwc: f64,
    pub objective: f64,
    pub chosen: bool,
}

pub fn sweep_rows(s: &SweepResult) -> Vec<SweepRow> {
    s.entries
        .iter()
        .map(|e| SweepRow {
            lambda: e.lambda,
            val_picp: e.val.picp,
            val_mpiw: e.val.mpiw,
            test_picp: e.test.picp,
            test_mpiw: e.test.mpiw,
            test_cwc: e.test.cwc,
            objective: e.objective,
            chosen: e.lambda == s.chosen_lambda,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub epoch: usize,
    pub coverage: f64,
    pub width: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

pub fn trajectory_rows(rec: &RunRecord) -> Vec<TrajectoryRow> {
    (0..rec.epochs())
        .map(|e| TrajectoryRow {
            epoch: e + 1,
            coverage: rec.coverage[e],
            width: rec.width[e],
            loss: rec.loss[e],
            grad_norm: rec.grad_norm[e],
        })
        .collect()
}

/// Serialize `rows` as CSV, optionally without the header line.
pub fn write_csv<W: Write, S: Serialize>(w: W, rows: &[S], header: bool) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(header).from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, S: Serialize + ?Sized>(w: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_named_columns_and_empty_optionals() {
        let row = ExperimentRow::blank("shift", "er", 0.5);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        for col in ["experiment", "kind", "level", "source_family", "target_family", "picp"] {
            assert!(header.split(',').any(|c| c == col), "{col}");
        }
        assert!(lines.next().unwrap().starts_with("shift,,er,,,,"));
    }

    #[test]
    fn header_can_be_suppressed() {
        let rows = vec![TrajectoryRow {
            epoch: 1,
            coverage: 0.5,
            width: 1.0,
            loss: 2.0,
            grad_norm: 3.0,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5,1.0,2.0,3.0\n");
    }
}
