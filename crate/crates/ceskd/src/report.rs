//! Run logs, metrics tables, report rows and plot-ready series.
//!
//! All tables are tab separated with a header line. Floats use the shortest
//! representation that parses back to the same value, so reading a table
//! recovers the exact numbers a run produced.

use std::path::Path;

use ceskd_core::engine::{EpochRecord, Method, Metrics, StepRecord};
use ceskd_core::stats::{summarize, Summary};

use crate::error::{self, Error, Result};

/// `63.58±0.045`: mean with two decimals, std with two significant digits
/// (at least two decimals). A missing std prints the mean alone.
pub fn format_mean_std(mean: f64, std: Option<f64>) -> String {
    match std {
        None => format!("{mean:.2}"),
        Some(s) => {
            let decimals = if s > 0.0 && s < 0.1 {
                (1 - s.log10().floor() as i32) as usize
            } else {
                2
            };
            format!("{mean:.2}±{s:.decimals$}")
        }
    }
}

pub fn format_summary(s: &Summary) -> String {
    if s.n == 0 {
        return "n/a".to_string();
    }
    format_mean_std(s.mean, s.std)
}

/// One model of one distillation run, for the metrics table.
#[derive(Clone, Debug, PartialEq)]
pub struct StageMetrics {
    pub stage: usize,
    pub model: String,
    pub depth_tag: u32,
    pub method: Method,
    pub metrics: Metrics,
}

const METRICS_COLUMNS: &str = "stage\tmodel\tdepth\tmethod\tepoch\ttrain_loss\ttop1\ttop5";

/// Per-epoch metrics of every stage. Wall-clock times are kept out so the
/// table is identical across repeated runs.
pub fn metrics_table(stages: &[StageMetrics]) -> String {
    let mut out = format!("{METRICS_COLUMNS}\n");
    for s in stages {
        let failure = s.metrics.failure.as_deref().unwrap_or("");
        for e in &s.metrics.epochs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                s.stage,
                s.model,
                s.depth_tag,
                s.method,
                e.epoch,
                e.train_loss,
                e.top1,
                e.top5
            ));
        }
        if !failure.is_empty() || s.metrics.epochs.is_empty() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\tfailed\t{}\t\t\n",
                s.stage,
                s.model,
                s.depth_tag,
                s.method,
                failure.replace(['\t', '\n'], " ")
            ));
        }
    }
    out
}

pub fn parse_metrics_table(text: &str, file: &str) -> Result<Vec<StageMetrics>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, METRICS_COLUMNS)) => {}
        _ => return Err(Error::line(file, 1, "not a metrics table")),
    }
    let mut out: Vec<StageMetrics> = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 8 {
            return Err(Error::line(file, no, format!("expected 8 columns, found {}", c.len())));
        }
        let bad = |what: &str| Error::line(file, no, format!("bad {what}"));
        let stage: usize = c[0].parse().map_err(|_| bad("stage"))?;
        let depth_tag: u32 = c[2].parse().map_err(|_| bad("depth"))?;
        let method: Method = c[3].parse().map_err(|_| bad("method"))?;
        if out.last().is_none_or(|s| s.stage != stage) {
            out.push(StageMetrics {
                stage,
                model: c[1].to_string(),
                depth_tag,
                method,
                metrics: Metrics::default(),
            });
        }
        let current = out.last_mut().expect("pushed above");
        if c[4] == "failed" {
            current.metrics.failure = Some(if c[5].is_empty() { "no epochs".to_string() } else { c[5].to_string() });
            continue;
        }
        current.metrics.epochs.push(EpochRecord {
            epoch: c[4].parse().map_err(|_| bad("epoch"))?,
            train_loss: c[5].parse().map_err(|_| bad("train loss"))?,
            top1: c[6].parse().map_err(|_| bad("top-1"))?,
            top5: c[7].parse().map_err(|_| bad("top-5"))?,
            wall_clock: 0.0,
        });
    }
    Ok(out)
}

pub fn write_metrics(path: &Path, stages: &[StageMetrics]) -> Result<()> {
    error::write(path, metrics_table(stages).as_bytes())
}

pub fn read_metrics(path: &Path) -> Result<Vec<StageMetrics>> {
    let bytes = error::read(path)?;
    let file = path.display().to_string();
    let text = String::from_utf8(bytes).map_err(|_| Error::line(&file, 0, "not UTF-8"))?;
    parse_metrics_table(&text, &file)
}

/// Run log: one line per optimizer step.
pub fn run_log(steps: &[(usize, StepRecord)]) -> String {
    let mut out = String::from("stage\tepoch\tstep\tbucket\texperts\tloss\n");
    for (stage, r) in steps {
        let experts = if r.experts.is_empty() {
            "-".to_string()
        } else {
            r.experts.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
        };
        out.push_str(&format!("{stage}\t{}\t{}\t{}\t{experts}\t{}\n", r.epoch, r.step, r.bucket, r.loss));
    }
    out
}

pub fn timing_table(stages: &[(usize, Vec<EpochRecord>)]) -> String {
    let mut out = String::from("stage\tepoch\twall_clock_s\n");
    for (stage, epochs) in stages {
        for e in epochs {
            out.push_str(&format!("{stage}\t{}\t{:.3}\n", e.epoch, e.wall_clock));
        }
    }
    out
}

/// One aggregated line of a report table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub method: String,
    pub policy: String,
    pub model: String,
    /// Final accuracy over the seeds that did not fail.
    pub accuracy: Summary,
    pub failed: usize,
    /// Seed mean of the first epoch reaching the threshold, if one was set.
    pub epochs_to_threshold: Option<f64>,
}

pub const REPORT_COLUMNS: &str = "experiment\tmethod\tpolicy\tmodel\tseeds\tfailed\ttop1\tmean\tstd\tepochs_to_threshold";

impl ReportRow {
    pub fn new(experiment: &str, method: &str, policy: &str, model: &str, accuracies: &[f64], failed: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            method: method.to_string(),
            policy: policy.to_string(),
            model: model.to_string(),
            accuracy: summarize(accuracies),
            failed,
            epochs_to_threshold: None,
        }
    }

    pub fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.experiment,
            self.method,
            self.policy,
            self.model,
            self.accuracy.n,
            self.failed,
            format_summary(&self.accuracy),
            self.accuracy.mean,
            opt(self.accuracy.std),
            opt(self.epochs_to_threshold)
        )
    }
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_COLUMNS}\n");
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// Seed-mean test accuracy and training loss per epoch, one column pair per
/// labelled run set. Runs shorter than the longest leave blanks.
pub fn series_table(series: &[(String, Vec<&Metrics>)]) -> String {
    let mut out = String::from("epoch");
    for (label, _) in series {
        out.push_str(&format!("\t{label}_top1\t{label}_train_loss"));
    }
    out.push('\n');
    let epochs = series
        .iter()
        .flat_map(|(_, runs)| runs.iter().map(|m| m.epochs.len()))
        .max()
        .unwrap_or(0);
    for e in 0..epochs {
        out.push_str(&e.to_string());
        for (_, runs) in series {
            let at: Vec<&EpochRecord> = runs.iter().filter_map(|m| m.epochs.get(e)).collect();
            if at.is_empty() {
                out.push_str("\t\t");
            } else {
                let n = at.len() as f64;
                let acc = at.iter().map(|r| r.top1).sum::<f64>() / n;
                let loss = at.iter().map(|r| r.train_loss).sum::<f64>() / n;
                out.push_str(&format!("\t{acc}\t{loss}"));
            }
        }
        out.push('\n');
    }
    out
}
