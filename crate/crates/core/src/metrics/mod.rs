//! Instance matching and the IoU-thresholded Precision / Recall / AP / mAP
//! evaluation.

mod ap;
mod matching;
mod report;

use std::collections::HashMap;

use crate::dataset::{AnatomyClass, AnnotatedDataset, Detection};
use crate::error::{Error, Result};

pub use ap::{ap_from_ranked, RECALL_LEVELS};
pub use matching::{
    greedy_match, match_detections, precision_recall, ranking, IouKind, MatchResult, MatchedPair,
    PrecisionRecall,
};
pub use report::{
    format_percent, render_csv, render_json, render_markdown, ClassReport, EvaluationReport, ReportFormat,
    ThresholdStats,
};

use matching::{iou_matrix, summarize, Shape};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.30, 0.50, 0.70];

/// IoU matrix for the detections of one class in one image.
struct Cell {
    /// Global detection indices, in input order.
    dets: Vec<usize>,
    n_gt: usize,
    ious: Vec<Vec<f64>>,
}

/// IoUs for every (image, class) pair, computed once and reused across
/// thresholds.
struct Prepared<'a> {
    dets: &'a [Detection],
    /// `cells[image][class]`
    cells: Vec<[Cell; 4]>,
}

impl<'a> Prepared<'a> {
    fn new(ds: &AnnotatedDataset, dets: &'a [Detection], kind: IouKind) -> Result<Self> {
        let index: HashMap<&str, usize> = ds
            .images()
            .iter()
            .enumerate()
            .map(|(i, img)| (img.id.as_str(), i))
            .collect();
        let mut by_cell: Vec<[Vec<usize>; 4]> = vec![Default::default(); ds.len()];
        for (i, d) in dets.iter().enumerate() {
            let img = *index
                .get(d.image_id.as_str())
                .ok_or_else(|| Error::UnknownImage(d.image_id.clone()))?;
            by_cell[img][d.class.ordinal()].push(i);
        }

        let mut cells = Vec::with_capacity(ds.len());
        for (img, per_class) in ds.images().iter().zip(by_cell) {
            let mut row: Vec<Cell> = Vec::with_capacity(4);
            for (class, det_ids) in AnatomyClass::ALL.into_iter().zip(per_class) {
                let gt_shapes = img
                    .regions
                    .iter()
                    .filter(|r| r.class == class)
                    .map(|r| Shape::of_region(r, img.dims, kind))
                    .collect::<Result<Vec<_>>>()?;
                let det_shapes = det_ids
                    .iter()
                    .map(|&i| Shape::of_detection(&dets[i], i, img.dims, kind))
                    .collect::<Result<Vec<_>>>()?;
                row.push(Cell {
                    ious: iou_matrix(&det_shapes, &gt_shapes)?,
                    n_gt: gt_shapes.len(),
                    dets: det_ids,
                });
            }
            cells.push(row.try_into().unwrap_or_else(|_| unreachable!()));
        }
        Ok(Self { dets, cells })
    }

    /// Pooled counts and AP for one class at one threshold.
    fn evaluate(&self, class: AnatomyClass, thr: f64) -> (MatchResult, f64) {
        let mut total = MatchResult::default();
        let mut ranked = Vec::new();
        let mut n_gt = 0;
        for row in &self.cells {
            let cell = &row[class.ordinal()];
            let scores: Vec<f64> = cell.dets.iter().map(|&i| self.dets[i].score).collect();
            let matches = greedy_match(&scores, &cell.ious, thr);
            let m = summarize(&matches, cell.n_gt);
            total.tp += m.tp;
            total.fp += m.fp;
            total.fn_ += m.fn_;
            total.pairs.extend(m.pairs.into_iter().map(|p| MatchedPair {
                detection: cell.dets[p.detection],
                ..p
            }));
            n_gt += cell.n_gt;
            ranked.extend(cell.dets.iter().zip(&matches).map(|(&i, m)| (i, m.is_some())));
        }
        // Pool in input order so equal scores keep the input tie-break.
        ranked.sort_by_key(|&(i, _)| i);
        let ranked: Vec<(f64, bool)> = ranked.into_iter().map(|(i, tp)| (self.dets[i].score, tp)).collect();
        total.pairs.sort_by_key(|p| p.detection);
        (total, ap_from_ranked(&ranked, n_gt))
    }
}

/// AP of one class pooled over every image of the dataset.
pub fn average_precision(
    ds: &AnnotatedDataset,
    dets: &[Detection],
    class: AnatomyClass,
    iou_thr: f64,
    kind: IouKind,
) -> Result<f64> {
    Ok(Prepared::new(ds, dets, kind)?.evaluate(class, iou_thr).1)
}

/// Mean of the four per-class APs.
pub fn mean_average_precision(ds: &AnnotatedDataset, dets: &[Detection], iou_thr: f64, kind: IouKind) -> Result<f64> {
    let prepared = Prepared::new(ds, dets, kind)?;
    let aps: Vec<f64> = AnatomyClass::ALL
        .iter()
        .map(|&c| prepared.evaluate(c, iou_thr).1)
        .collect();
    Ok(mean(&aps))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn build_report(
    ds: &AnnotatedDataset,
    dets: &[Detection],
    thresholds: &[f64],
    kind: IouKind,
) -> Result<EvaluationReport> {
    if thresholds.is_empty() {
        return Err(Error::Config("at least one IoU threshold is required".into()));
    }
    if let Some(t) = thresholds.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Config(format!("IoU threshold {t} outside (0, 1]")));
    }
    let prepared = Prepared::new(ds, dets, kind)?;
    let classes: Vec<ClassReport> = AnatomyClass::ALL
        .iter()
        .map(|&class| ClassReport {
            class,
            thresholds: thresholds
                .iter()
                .map(|&t| {
                    let (m, ap) = prepared.evaluate(class, t);
                    ThresholdStats::from_match(t, &m, ap)
                })
                .collect(),
        })
        .collect();
    Ok(EvaluationReport::new(kind, thresholds.to_vec(), classes))
}
