//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use anatomask::anchors::Anchor;
use anatomask::dataset::{encode_rle, AnatomyClass, AnnotatedDataset, AnnotatedImage, AnnotatedRegion, Detection};
use anatomask::geometry::{rasterize_polygon, BitMask, BoundingBox, GridDims, Polygon};
use anatomask::metrics::RECALL_LEVELS;

pub const SPECIES: [&str; 9] = [
    "aedes_aegypti",
    "aedes_albopictus",
    "aedes_infirmatus",
    "aedes_taeniorhynchus",
    "anopheles_crucians",
    "anopheles_quadrimaculatus",
    "culex_coronator",
    "culex_nigripalpus",
    "culex_salinarius",
];

pub fn dims(w: usize, h: usize) -> GridDims {
    GridDims::new(w, h).unwrap()
}

pub fn bbox(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new(x, y, w, h).unwrap()
}

pub fn rect(class: AnatomyClass, x: f64, y: f64, w: f64, h: f64) -> AnnotatedRegion {
    AnnotatedRegion {
        class,
        polygon: bbox(x, y, w, h).to_polygon(),
    }
}

pub fn image(id: &str, d: GridDims, regions: Vec<AnnotatedRegion>) -> AnnotatedImage {
    AnnotatedImage::new(id, d, regions).unwrap()
}

/// 27 images holding 27 thoraxes, 27 abdomens, 48 wings and 105 legs.
pub fn test_set_dataset() -> AnnotatedDataset {
    let d = dims(256, 256);
    let images = (0..27)
        .map(|i| {
            let wings = if i < 21 { 2 } else { 1 };
            let legs = if i < 24 { 4 } else { 3 };
            let mut regions = vec![
                rect(AnatomyClass::Thorax, 20.0, 20.0, 40.0, 30.0),
                rect(AnatomyClass::Abdomen, 70.0, 20.0, 60.0, 30.0),
            ];
            for k in 0..wings {
                regions.push(rect(AnatomyClass::Wing, 20.0 + 50.0 * k as f64, 70.0, 40.0, 20.0));
            }
            for k in 0..legs {
                regions.push(rect(AnatomyClass::Leg, 10.0 + 30.0 * k as f64, 120.0, 6.0, 60.0));
            }
            image(&format!("test_{i:03}.jpg"), d, regions)
        })
        .collect();
    AnnotatedDataset::new(images).unwrap()
}

/// `n` images spread round-robin over the nine species, one thorax each.
pub fn species_dataset(n: usize) -> AnnotatedDataset {
    let d = dims(64, 48);
    let images = (0..n)
        .map(|i| {
            let off = (i % 7) as f64;
            let regions = vec![
                rect(AnatomyClass::Thorax, 10.0 + off, 8.0, 20.0, 14.0),
                AnnotatedRegion {
                    class: AnatomyClass::Leg,
                    polygon: Polygon::new(vec![(30.0, 30.0), (50.0 + off, 40.0), (48.0 + off, 43.0)]).unwrap(),
                },
            ];
            image(&format!("{}_{i:03}.jpg", SPECIES[i % SPECIES.len()]), d, regions)
        })
        .collect();
    AnnotatedDataset::new(images).unwrap()
}

/// 20x20 anchor over a 2 px wide, 20 px long vertical leg.
pub fn leg_stripe() -> (Anchor, BitMask) {
    let leg = bbox(15.0, 6.0, 2.0, 20.0).to_polygon();
    (Anchor::new(bbox(6.0, 6.0, 20.0, 20.0), 0), rasterize_polygon(&leg, dims(32, 32)))
}

/// A thin diagonal leg inside the square anchor that encloses it.
pub fn diagonal_leg() -> (Anchor, BitMask) {
    let leg = Polygon::new(vec![(64.0, 66.0), (66.0, 64.0), (192.0, 190.0), (190.0, 192.0)]).unwrap();
    (Anchor::new(bbox(64.0, 64.0, 128.0, 128.0), 0), rasterize_polygon(&leg, dims(256, 256)))
}

/// One detection per GT region, exact box and mask.
pub fn perfect_predictions(ds: &AnnotatedDataset) -> Vec<Detection> {
    ds.images()
        .iter()
        .flat_map(|img| {
            img.regions.iter().map(move |r| Detection {
                image_id: img.id.clone(),
                class: r.class,
                score: 0.9,
                bbox: r.polygon.bounding_box().unwrap(),
                mask: Some(encode_rle(&rasterize_polygon(&r.polygon, img.dims))),
            })
        })
        .collect()
}

/// Box-and-mask detection of an axis-aligned rectangle.
pub fn rect_detection(img: &AnnotatedImage, class: AnatomyClass, score: f64, b: BoundingBox) -> Detection {
    Detection {
        image_id: img.id.clone(),
        class,
        score,
        bbox: b,
        mask: Some(encode_rle(&rasterize_polygon(&b.to_polygon(), img.dims))),
    }
}

/// Hand-built evaluation fixture, every match enumerable by eye.
/// - `hand_a.png` thorax: GTs at (10,10) and (60,60), both 20x20;
///   detections exact on the first (0.9), shifted 5 px right of the second
///   (IoU 15/25 = 0.6, score 0.8), and one far from both (0.7).
/// - `hand_b.png`: one abdomen GT with no detection, one wing detection
///   with no GT.
/// - leg: nothing anywhere.
pub fn hand_fixture() -> (AnnotatedDataset, Vec<Detection>) {
    let a = image(
        "hand_a.png",
        dims(100, 100),
        vec![
            rect(AnatomyClass::Thorax, 10.0, 10.0, 20.0, 20.0),
            rect(AnatomyClass::Thorax, 60.0, 60.0, 20.0, 20.0),
        ],
    );
    let b = image("hand_b.png", dims(80, 60), vec![rect(AnatomyClass::Abdomen, 40.0, 5.0, 30.0, 10.0)]);
    let dets = vec![
        rect_detection(&a, AnatomyClass::Thorax, 0.9, bbox(10.0, 10.0, 20.0, 20.0)),
        rect_detection(&a, AnatomyClass::Thorax, 0.8, bbox(65.0, 60.0, 20.0, 20.0)),
        rect_detection(&a, AnatomyClass::Thorax, 0.7, bbox(5.0, 70.0, 10.0, 10.0)),
        rect_detection(&b, AnatomyClass::Wing, 0.6, bbox(10.0, 30.0, 10.0, 10.0)),
    ];
    (AnnotatedDataset::new(vec![a, b]).unwrap(), dets)
}

/// Four images, one GT box per class each, with detections shifted so the
/// IoUs spread over 0.82, 0.6, 0.43 and 0.25.
pub fn graded_fixture() -> (AnnotatedDataset, Vec<Detection>) {
    let shifts = [2.0, 5.0, 8.0, 12.0];
    let mut images = Vec::new();
    let mut dets = Vec::new();
    for (i, &dx) in shifts.iter().enumerate() {
        let regions: Vec<AnnotatedRegion> = AnatomyClass::ALL
            .iter()
            .enumerate()
            .map(|(k, &c)| rect(c, 10.0 + 40.0 * k as f64, 30.0, 20.0, 20.0))
            .collect();
        let img = image(&format!("graded_{i}.png"), dims(200, 80), regions);
        for (k, &c) in AnatomyClass::ALL.iter().enumerate() {
            let b = bbox(10.0 + 40.0 * k as f64 + dx, 30.0, 20.0, 20.0);
            dets.push(rect_detection(&img, c, 0.95 - 0.1 * i as f64, b));
        }
        images.push(img);
    }
    (AnnotatedDataset::new(images).unwrap(), dets)
}

/// Largest number of disjoint (detection, GT) pairs with IoU >= `thr`,
/// by dynamic programming over GT subsets.
pub fn max_matching(ious: &[Vec<f64>], n_gt: usize, thr: f64) -> usize {
    let full = 1usize << n_gt;
    let mut best = vec![0usize; full];
    for row in ious {
        let prev = best.clone();
        for used in 0..full {
            for (g, &iou) in row.iter().enumerate() {
                if iou >= thr && used & (1 << g) == 0 {
                    let next = used | (1 << g);
                    best[next] = best[next].max(prev[used] + 1);
                }
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

/// Greedy matching restated from its definition: detections by descending
/// score (lower index first on ties) each take the free GT of highest IoU
/// at or above `thr`, lowest GT index on ties. Returns matched flags.
pub fn greedy_flags(scores: &[f64], ious: &[Vec<f64>], n_gt: usize, thr: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut free = vec![true; n_gt];
    let mut flags = vec![false; scores.len()];
    for d in order {
        let mut pick: Option<usize> = None;
        for g in 0..n_gt {
            if free[g] && ious[d][g] >= thr && pick.is_none_or(|p| ious[d][g] > ious[d][p]) {
                pick = Some(g);
            }
        }
        if let Some(g) = pick {
            free[g] = false;
            flags[d] = true;
        }
    }
    flags
}

/// AP by enumerating score thresholds: for every distinct score `s`, keep
/// detections scoring at least `s`, match them from scratch and record
/// (recall, precision). The precision at each of the 101 recall levels is
/// the best precision among operating points reaching that recall.
/// Scores must be distinct.
pub fn ap_by_threshold_enumeration(scores: &[f64], ious: &[Vec<f64>], n_gt: usize, thr: f64) -> f64 {
    if n_gt == 0 {
        return if scores.is_empty() { 1.0 } else { 0.0 };
    }
    let mut points = Vec::new();
    for &s in scores {
        let keep: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= s).collect();
        let sub_scores: Vec<f64> = keep.iter().map(|&i| scores[i]).collect();
        let sub_ious: Vec<Vec<f64>> = keep.iter().map(|&i| ious[i].clone()).collect();
        let tp = greedy_flags(&sub_scores, &sub_ious, n_gt, thr).iter().filter(|&&f| f).count();
        points.push((tp as f64 / n_gt as f64, tp as f64 / keep.len() as f64));
    }
    let mut total = 0.0;
    for k in 0..RECALL_LEVELS {
        let level = k as f64 / (RECALL_LEVELS - 1) as f64;
        total += points
            .iter()
            .filter(|&&(r, _)| r >= level)
            .map(|&(_, p)| p)
            .fold(0.0, f64::max);
    }
    total / RECALL_LEVELS as f64
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> CliOutput {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("anatomask").chain(args.iter().copied());
    let code = anatomask::cli::run(argv, &mut out, &mut err);
    CliOutput {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}
