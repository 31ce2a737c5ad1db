//! Anchor grids, box-regression encoding, anchor matching, NMS, and the
//! foreground/background pixel balance inside an anchor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_iou, BitMask, BoundingBox, GridDims};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub bbox: BoundingBox,
    pub level: usize,
}

impl Anchor {
    pub fn new(bbox: BoundingBox, level: usize) -> Self {
        Self { bbox, level }
    }
}

/// Offsets of a box relative to an anchor: `tx, ty` in anchor widths and
/// heights, `tw, th` as natural-log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionTarget {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl RegressionTarget {
    pub const ZERO: RegressionTarget = RegressionTarget {
        tx: 0.0,
        ty: 0.0,
        tw: 0.0,
        th: 0.0,
    };

    pub fn new(tx: f64, ty: f64, tw: f64, th: f64) -> Result<Self> {
        if [tx, ty, tw, th].iter().all(|v| v.is_finite()) {
            Ok(Self { tx, ty, tw, th })
        } else {
            Err(Error::domain("regression target must be finite"))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }
}

/// One pyramid level: anchors centered on a `stride`-spaced grid, one per
/// scale and aspect ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorLevel {
    pub stride: f64,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub levels: Vec<AnchorLevel>,
    /// Width / height.
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub clip: bool,
}

impl Default for AnchorConfig {
    /// Five FPN levels, one scale each, three ratios.
    fn default() -> Self {
        let levels = [(4.0, 32.0), (8.0, 64.0), (16.0, 128.0), (32.0, 256.0), (64.0, 512.0)]
            .into_iter()
            .map(|(stride, scale)| AnchorLevel {
                stride,
                scales: vec![scale],
            })
            .collect();
        Self {
            levels,
            ratios: vec![0.5, 1.0, 2.0],
            clip: false,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.levels.is_empty() {
            return Err(Error::Config("anchor config needs at least one level".into()));
        }
        for (i, level) in self.levels.iter().enumerate() {
            if !positive(level.stride) || level.scales.is_empty() || !level.scales.iter().all(|&s| positive(s)) {
                return Err(Error::Config(format!("anchor level {i} needs a positive stride and scales")));
            }
        }
        if self.ratios.is_empty() || !self.ratios.iter().all(|&r| positive(r)) {
            return Err(Error::Config("anchor ratios must be positive and non-empty".into()));
        }
        Ok(())
    }

    /// Anchors `generate_anchors` yields for `image`, before clipping drops any.
    pub fn anchor_count(&self, image: GridDims) -> usize {
        self.levels
            .iter()
            .map(|l| {
                let (cols, rows) = cells(l.stride, image);
                cols * rows * l.scales.len() * self.ratios.len()
            })
            .sum()
    }
}

fn cells(stride: f64, image: GridDims) -> (usize, usize) {
    (
        (image.width as f64 / stride).ceil() as usize,
        (image.height as f64 / stride).ceil() as usize,
    )
}

/// Order: level, row, column, scale, ratio.
pub fn generate_anchors(cfg: &AnchorConfig, image: GridDims) -> Result<Vec<Anchor>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.anchor_count(image));
    for (level, lvl) in cfg.levels.iter().enumerate() {
        let (cols, rows) = cells(lvl.stride, image);
        for row in 0..rows {
            let cy = (row as f64 + 0.5) * lvl.stride;
            for col in 0..cols {
                let cx = (col as f64 + 0.5) * lvl.stride;
                for &scale in &lvl.scales {
                    for &ratio in &cfg.ratios {
                        let w = scale * ratio.sqrt();
                        let h = scale / ratio.sqrt();
                        let bbox = BoundingBox::new(cx - 0.5 * w, cy - 0.5 * h, w, h)?;
                        let bbox = if cfg.clip {
                            match bbox.clip(image) {
                                Some(b) => b,
                                None => continue,
                            }
                        } else {
                            bbox
                        };
                        out.push(Anchor { bbox, level });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn encode_box(anchor: &Anchor, target: &BoundingBox) -> RegressionTarget {
    let a = &anchor.bbox;
    RegressionTarget {
        tx: (target.x() - a.x()) / a.w(),
        ty: (target.y() - a.y()) / a.h(),
        tw: (target.w() / a.w()).ln(),
        th: (target.h() / a.h()).ln(),
    }
}

pub fn decode_box(anchor: &Anchor, t: &RegressionTarget) -> Result<BoundingBox> {
    let a = &anchor.bbox;
    BoundingBox::new(
        a.x() + t.tx * a.w(),
        a.y() + t.ty * a.h(),
        a.w() * t.tw.exp(),
        a.h() * t.th.exp(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "label", content = "gt")]
pub enum MatchLabel {
    Positive(usize),
    Negative,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchThresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        Self {
            positive: 0.5,
            negative: 0.3,
        }
    }
}

/// Label anchors against ground-truth boxes.
///
/// An anchor is positive when its best IoU reaches `thr.positive` (assigned
/// to its best GT, lowest index on ties), negative below `thr.negative`, and
/// ignored in between. Then each GT in order claims its best-IoU anchor as a
/// positive, skipping anchors already claimed by an earlier GT, so every GT
/// keeps at least one positive while there are at least as many anchors as
/// GTs.
pub fn match_anchors(anchors: &[Anchor], gts: &[BoundingBox], thr: MatchThresholds) -> Result<Vec<MatchLabel>> {
    if !(0.0 <= thr.negative && thr.negative <= thr.positive && thr.positive <= 1.0) {
        return Err(Error::Config(format!(
            "need 0 <= negative ({}) <= positive ({}) <= 1",
            thr.negative, thr.positive
        )));
    }
    let ious: Vec<Vec<f64>> = anchors
        .iter()
        .map(|a| gts.iter().map(|g| box_iou(&a.bbox, g)).collect())
        .collect();

    let mut labels: Vec<MatchLabel> = ious
        .iter()
        .map(|row| match argmax(row.iter().copied()) {
            None => MatchLabel::Negative,
            Some((gt, best)) if best >= thr.positive => MatchLabel::Positive(gt),
            Some((_, best)) if best < thr.negative => MatchLabel::Negative,
            Some(_) => MatchLabel::Ignore,
        })
        .collect();

    let mut claimed = vec![false; anchors.len()];
    for gt in 0..gts.len() {
        let best = argmax(
            ious.iter()
                .zip(&claimed)
                .map(|(row, &taken)| if taken { f64::NEG_INFINITY } else { row[gt] }),
        );
        if let Some((anchor, iou)) = best {
            if iou > f64::NEG_INFINITY {
                claimed[anchor] = true;
                labels[anchor] = MatchLabel::Positive(gt);
            }
        }
    }
    Ok(labels)
}

/// Index and value of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    values.enumerate().fold(None, |best, (i, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((i, v)),
    })
}

/// Greedy non-maximum suppression. Returns kept indices in keep order.
pub fn nms(boxes: &[(BoundingBox, f64)], thr: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].1.total_cmp(&boxes[a].1).then(a.cmp(&b)));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep.iter().all(|&k| box_iou(&boxes[i].0, &boxes[k].0) < thr) {
            keep.push(i);
        }
    }
    keep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PixelBalance {
    pub foreground: usize,
    pub background: usize,
}

impl PixelBalance {
    /// Background pixels per foreground pixel; infinite with no foreground.
    pub fn background_per_foreground(&self) -> f64 {
        self.background as f64 / self.foreground as f64
    }
}

/// Set vs unset mask pixels whose centers fall inside the anchor.
pub fn fg_bg_ratio(anchor: &Anchor, gt_mask: &BitMask) -> Result<PixelBalance> {
    let (x0, x1, y0, y1) = anchor.bbox.pixel_span(gt_mask.dims());
    if x0 == x1 || y0 == y1 {
        return Err(Error::InvalidGeometry("anchor lies outside the mask grid".into()));
    }
    let mut foreground = 0;
    for y in y0..y1 {
        for x in x0..x1 {
            foreground += gt_mask.get(x, y) as usize;
        }
    }
    Ok(PixelBalance {
        foreground,
        background: (x1 - x0) * (y1 - y0) - foreground,
    })
}
