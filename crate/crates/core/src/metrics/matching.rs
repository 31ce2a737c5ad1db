use serde::{Deserialize, Serialize};

use crate::dataset::{decode_rle, AnnotatedRegion, Detection};
use crate::error::{Error, Result};
use crate::geometry::{box_iou, mask_iou, rasterize_polygon, BitMask, BoundingBox, GridDims};

/// Which overlap measure decides a match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum IouKind {
    Box,
    #[default]
    Mask,
}

impl IouKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IouKind::Box => "box",
            IouKind::Mask => "mask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub detection: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pairs: Vec<MatchedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

/// Detection order for greedy matching: score descending, index ascending.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy assignment over a detection x GT IoU matrix. Each detection, in
/// ranked order, takes the unmatched GT of highest IoU (lowest index on
/// ties) provided that IoU reaches `thr`. Returns the match of every
/// detection, indexed like `scores`.
pub fn greedy_match(scores: &[f64], ious: &[Vec<f64>], thr: f64) -> Vec<Option<(usize, f64)>> {
    let n_gt = ious.first().map_or(0, Vec::len);
    let mut taken = vec![false; n_gt];
    let mut out = vec![None; scores.len()];
    for d in ranking(scores) {
        let mut best: Option<(usize, f64)> = None;
        for (g, &iou) in ious[d].iter().enumerate() {
            if taken[g] || iou < thr {
                continue;
            }
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        out[d] = best;
    }
    out
}

pub(crate) fn summarize(matches: &[Option<(usize, f64)>], n_gt: usize) -> MatchResult {
    let pairs: Vec<MatchedPair> = matches
        .iter()
        .enumerate()
        .filter_map(|(d, m)| m.map(|(gt, iou)| MatchedPair { detection: d, gt, iou }))
        .collect();
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: matches.len() - tp,
        fn_: n_gt - tp,
        pairs,
    }
}

/// Ground truth resolved to the geometry one IoU kind compares.
pub(crate) enum Shape {
    Box(BoundingBox),
    Mask(BitMask),
}

impl Shape {
    pub(crate) fn of_region(region: &AnnotatedRegion, dims: GridDims, kind: IouKind) -> Result<Shape> {
        Ok(match kind {
            IouKind::Box => Shape::Box(region.polygon.bounding_box()?),
            IouKind::Mask => Shape::Mask(rasterize_polygon(&region.polygon, dims)),
        })
    }

    /// `index` names the detection in errors.
    pub(crate) fn of_detection(det: &Detection, index: usize, dims: GridDims, kind: IouKind) -> Result<Shape> {
        match kind {
            IouKind::Box => Ok(Shape::Box(det.bbox)),
            IouKind::Mask => {
                let rle = det.mask.as_ref().ok_or(Error::MissingMask { index })?;
                if rle.width() != dims.width || rle.height() != dims.height {
                    return Err(Error::DimensionMismatch(rle.width(), rle.height(), dims.width, dims.height));
                }
                Ok(Shape::Mask(decode_rle(rle)?))
            }
        }
    }

    pub(crate) fn iou(&self, other: &Shape) -> Result<f64> {
        match (self, other) {
            (Shape::Box(a), Shape::Box(b)) => Ok(box_iou(a, b)),
            (Shape::Mask(a), Shape::Mask(b)) => mask_iou(a, b),
            _ => unreachable!("shapes of one evaluation share a kind"),
        }
    }
}

pub(crate) fn iou_matrix(dets: &[Shape], gts: &[Shape]) -> Result<Vec<Vec<f64>>> {
    dets.iter()
        .map(|d| gts.iter().map(|g| d.iou(g)).collect())
        .collect()
}

/// Match the detections of one class in one image against that image's
/// regions of the same class.
pub fn match_detections(
    dets: &[Detection],
    gts: &[AnnotatedRegion],
    dims: GridDims,
    iou_thr: f64,
    kind: IouKind,
) -> Result<MatchResult> {
    let det_shapes = dets
        .iter()
        .enumerate()
        .map(|(i, d)| Shape::of_detection(d, i, dims, kind))
        .collect::<Result<Vec<_>>>()?;
    let gt_shapes = gts
        .iter()
        .map(|g| Shape::of_region(g, dims, kind))
        .collect::<Result<Vec<_>>>()?;
    let ious = iou_matrix(&det_shapes, &gt_shapes)?;
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    Ok(summarize(&greedy_match(&scores, &ious, iou_thr), gts.len()))
}

/// Precision is 1 with no detections; recall is 1 with no ground truth.
pub fn precision_recall(m: &MatchResult) -> PrecisionRecall {
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    PrecisionRecall {
        precision: ratio(m.tp, m.tp + m.fp),
        recall: ratio(m.tp, m.tp + m.fn_),
    }
}
