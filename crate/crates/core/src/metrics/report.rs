use std::fmt::Write as _;

use serde::Serialize;

use super::matching::{precision_recall, IouKind, MatchResult};
use crate::dataset::AnatomyClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdStats {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
}

impl ThresholdStats {
    pub fn from_match(threshold: f64, m: &MatchResult, ap: f64) -> Self {
        let pr = precision_recall(m);
        Self {
            threshold,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            precision: pr.precision,
            recall: pr.recall,
            ap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: AnatomyClass,
    /// One entry per report threshold, same order.
    pub thresholds: Vec<ThresholdStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub iou_kind: IouKind,
    pub thresholds: Vec<f64>,
    pub classes: Vec<ClassReport>,
    /// Mean of the per-class APs at each threshold.
    pub map: Vec<f64>,
}

impl EvaluationReport {
    pub fn new(iou_kind: IouKind, thresholds: Vec<f64>, classes: Vec<ClassReport>) -> Self {
        let map = (0..thresholds.len())
            .map(|t| super::mean(&classes.iter().map(|c| c.thresholds[t].ap).collect::<Vec<_>>()))
            .collect();
        Self {
            iou_kind,
            thresholds,
            classes,
            map,
        }
    }

    pub fn class(&self, class: AnatomyClass) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => render_json(self),
            ReportFormat::Csv => render_csv(self),
            ReportFormat::Md => render_markdown(self),
        }
    }
}

/// Percentage with two decimals, dropping them when the value is whole:
/// 0.875 -> "87.50", 0.96 -> "96".
pub fn format_percent(ratio: f64) -> String {
    let hundredths = (ratio * 10_000.0).round();
    if hundredths % 100.0 == 0.0 {
        format!("{:.0}", hundredths / 100.0)
    } else {
        format!("{:.2}", hundredths / 100.0)
    }
}

pub fn render_json(report: &EvaluationReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

/// One row per class and threshold.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("class,iou_kind,iou_threshold,precision,recall,ap,tp,fp,fn\n");
    for c in &report.classes {
        for s in &c.thresholds {
            let _ = writeln!(
                out,
                "{},{},{:.2},{},{},{},{},{},{}",
                c.class,
                report.iou_kind.as_str(),
                s.threshold,
                s.precision,
                s.recall,
                s.ap,
                s.tp,
                s.fp,
                s.fn_
            );
        }
    }
    out
}

/// Precision / recall table with a column pair per threshold, followed by
/// the mAP table.
pub fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "IoU kind: {}", report.iou_kind.as_str());
    out.push('\n');

    out.push_str("| Anatomy |");
    for t in &report.thresholds {
        let _ = write!(out, " IoU={t:.2} Precision (%) | IoU={t:.2} Recall (%) |");
    }
    out.push('\n');
    out.push_str("|---|");
    out.push_str(&"---|---|".repeat(report.thresholds.len()));
    out.push('\n');
    for c in &report.classes {
        let _ = write!(out, "| {} |", c.class.title());
        for s in &c.thresholds {
            let _ = write!(out, " {} | {} |", format_percent(s.precision), format_percent(s.recall));
        }
        out.push('\n');
    }

    out.push_str("\n| IoU Ratio | mAP (%) |\n|---|---|\n");
    for (t, m) in report.thresholds.iter().zip(&report.map) {
        let _ = writeln!(out, "| {t:.2} | {} |", format_percent(*m));
    }
    out
}
