mod common;

use anatomask::anchors::{
    decode_box, encode_box, fg_bg_ratio, generate_anchors, match_anchors, nms, Anchor, AnchorConfig, AnchorLevel,
    MatchLabel, MatchThresholds,
};
use anatomask::geometry::{box_iou, rasterize_polygon, BitMask, BoundingBox, GridDims};
use common::{bbox, dims, diagonal_leg, leg_stripe};
use proptest::prelude::*;

fn real_box() -> impl Strategy<Value = BoundingBox> {
    (-200.0..200.0, -200.0..200.0, 0.5..300.0, 0.5..300.0).prop_map(|(x, y, w, h)| bbox(x, y, w, h))
}

fn scored_boxes() -> impl Strategy<Value = Vec<(BoundingBox, f64)>> {
    prop::collection::vec(
        ((0u32..60, 0u32..60, 1u32..30, 1u32..30), 0.0..1.0f64)
            .prop_map(|((x, y, w, h), s)| (bbox(x as f64, y as f64, w as f64, h as f64), s)),
        1..25,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn encode_decode_roundtrip(a in real_box(), b in real_box()) {
        let anchor = Anchor::new(a, 0);
        let back = decode_box(&anchor, &encode_box(&anchor, &b)).unwrap();
        for (u, v) in [(back.x(), b.x()), (back.y(), b.y()), (back.w(), b.w()), (back.h(), b.h())] {
            prop_assert!((u - v).abs() < 1e-9, "{} vs {}", u, v);
        }
    }

    #[test]
    fn encoding_is_translation_equivariant(a in real_box(), b in real_box(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let t = encode_box(&Anchor::new(a, 0), &b);
        let shift = |r: &BoundingBox| bbox(r.x() + dx, r.y() + dy, r.w(), r.h());
        let u = encode_box(&Anchor::new(shift(&a), 0), &shift(&b));
        prop_assert!((t.tx - u.tx).abs() < 1e-12, "{} vs {}", t.tx, u.tx);
        prop_assert!((t.ty - u.ty).abs() < 1e-12, "{} vs {}", t.ty, u.ty);
        prop_assert_eq!((t.tw, t.th), (u.tw, u.th));
    }

    #[test]
    fn nms_keeps_top_box_and_separates_survivors(boxes in scored_boxes(), thr in 0.05..0.95f64) {
        let keep = nms(&boxes, thr);
        prop_assert!(keep.iter().all(|&i| i < boxes.len()));
        let mut sorted = keep.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), keep.len());
        let top = (0..boxes.len()).max_by(|&a, &b| boxes[a].1.total_cmp(&boxes[b].1).then(b.cmp(&a))).unwrap();
        prop_assert_eq!(keep[0], top);
        for (n, &i) in keep.iter().enumerate() {
            for &j in &keep[n + 1..] {
                prop_assert!(box_iou(&boxes[i].0, &boxes[j].0) < thr);
            }
        }
    }

    #[test]
    fn every_gt_gets_a_positive(
        gts in prop::collection::vec((0u32..180, 0u32..180, 4u32..80, 4u32..80), 1..6),
        clip in any::<bool>(),
    ) {
        let cfg = AnchorConfig {
            levels: vec![AnchorLevel { stride: 32.0, scales: vec![48.0] }],
            ratios: vec![0.5, 1.0, 2.0],
            clip,
        };
        let anchors = generate_anchors(&cfg, dims(256, 256)).unwrap();
        let gts: Vec<BoundingBox> = gts.into_iter().map(|(x, y, w, h)| bbox(x as f64, y as f64, w as f64, h as f64)).collect();
        let labels = match_anchors(&anchors, &gts, MatchThresholds::default()).unwrap();
        for g in 0..gts.len() {
            prop_assert!(labels.contains(&MatchLabel::Positive(g)), "gt {} has no positive", g);
        }
        for (a, l) in anchors.iter().zip(&labels) {
            let best = gts.iter().map(|g| box_iou(&a.bbox, g)).fold(0.0, f64::max);
            if let MatchLabel::Negative = l {
                prop_assert!(best < 0.3);
            }
            if let MatchLabel::Ignore = l {
                prop_assert!((0.3..0.5).contains(&best));
            }
        }
    }

    #[test]
    fn pixel_balance_sums_to_clipped_area(
        a in (-20i32..60, -20i32..60, 1u32..50, 1u32..50),
        bits in prop::collection::vec(any::<bool>(), 48 * 40),
    ) {
        let mask = BitMask::from_bits(48, 40, bits).unwrap();
        let b = bbox(a.0 as f64, a.1 as f64, a.2 as f64, a.3 as f64);
        match b.clip(mask.dims()) {
            None => prop_assert!(fg_bg_ratio(&Anchor::new(b, 0), &mask).is_err()),
            Some(c) => {
                let bal = fg_bg_ratio(&Anchor::new(b, 0), &mask).unwrap();
                prop_assert_eq!((bal.foreground + bal.background) as f64, c.area());
                let inside = rasterize_polygon(&c.to_polygon(), mask.dims());
                let fg = mask.bits().iter().zip(inside.bits()).filter(|(m, i)| **m && **i).count();
                prop_assert_eq!(bal.foreground, fg);
            }
        }
    }
}

#[test]
fn hand_computed_encoding() {
    let t = encode_box(&Anchor::new(bbox(10.0, 10.0, 20.0, 20.0), 0), &bbox(15.0, 12.0, 40.0, 10.0));
    let ln2 = std::f64::consts::LN_2;
    for (got, want) in t.as_array().into_iter().zip([0.25, 0.1, ln2, -ln2]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn anchor_count_is_grid_times_scales_times_ratios() {
    let cfg = AnchorConfig::default();
    let img = dims(1024, 768);
    let expected: usize = [4.0, 8.0, 16.0, 32.0, 64.0]
        .iter()
        .map(|&s: &f64| ((1024.0 / s).ceil() * (768.0 / s).ceil()) as usize * 3)
        .sum();
    assert_eq!(cfg.anchor_count(img), expected);
    assert_eq!(generate_anchors(&cfg, img).unwrap().len(), expected);
}

#[test]
fn no_ground_truth_means_all_negative() {
    let anchors = generate_anchors(&AnchorConfig::default(), dims(128, 128)).unwrap();
    let labels = match_anchors(&anchors, &[], MatchThresholds::default()).unwrap();
    assert!(labels.iter().all(|l| *l == MatchLabel::Negative));
}

#[test]
fn leg_stripes_are_mostly_background() {
    let (anchor, mask) = leg_stripe();
    let bal = fg_bg_ratio(&anchor, &mask).unwrap();
    assert_eq!((bal.foreground, bal.background), (40, 360));
    assert_eq!(bal.background_per_foreground(), 9.0);

    let (anchor, mask) = diagonal_leg();
    let bal = fg_bg_ratio(&anchor, &mask).unwrap();
    assert!(bal.background > 5 * bal.foreground);
    assert_eq!(bal.foreground, mask.count());
}

#[test]
fn anchors_cover_the_image_grid() {
    let cfg = AnchorConfig {
        levels: vec![AnchorLevel {
            stride: 16.0,
            scales: vec![16.0],
        }],
        ratios: vec![1.0],
        clip: false,
    };
    let anchors = generate_anchors(&cfg, GridDims::new(64, 32).unwrap()).unwrap();
    assert_eq!(anchors.len(), 8);
    assert_eq!(anchors[0].bbox, bbox(0.0, 0.0, 16.0, 16.0));
    assert_eq!(anchors[7].bbox, bbox(48.0, 16.0, 16.0, 16.0));
}
