//! Prediction files: a JSON array of
//! `{image_id, class, score, bbox: [x, y, w, h], rle?: {width, height, runs}}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::via::json_error;
use super::{AnatomyClass, RleMask};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class: AnatomyClass,
    pub score: f64,
    pub bbox: BoundingBox,
    pub mask: Option<RleMask>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    image_id: String,
    class: String,
    score: f64,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rle: Option<Value>,
}

pub fn parse_predictions(doc: &str) -> Result<Vec<Detection>> {
    let root: Value = serde_json::from_str(doc).map_err(|e| json_error(doc, &e))?;
    let Value::Array(items) = root else {
        return Err(Error::InvalidPrediction {
            index: 0,
            reason: "predictions must be a JSON array".into(),
        });
    };
    items
        .into_iter()
        .enumerate()
        .map(|(index, item)| parse_record(index, item))
        .collect()
}

fn parse_record(index: usize, item: Value) -> Result<Detection> {
    let bad = |reason: String| Error::InvalidPrediction { index, reason };
    let rec: Record = serde_json::from_value(item).map_err(|e| bad(e.to_string()))?;
    if !(0.0..=1.0).contains(&rec.score) {
        return Err(bad(format!("score {} outside [0, 1]", rec.score)));
    }
    let class = AnatomyClass::from_label(&rec.class)
        .ok_or_else(|| bad(format!("unknown class {:?}", rec.class)))?;
    let [x, y, w, h] = rec.bbox;
    let bbox = BoundingBox::new(x, y, w, h).map_err(|e| bad(e.to_string()))?;
    let mask = rec
        .rle
        .map(serde_json::from_value::<RleMask>)
        .transpose()
        .map_err(|e| bad(format!("bad rle: {e}")))?;
    if rec.image_id.is_empty() {
        return Err(bad("empty image_id".into()));
    }
    Ok(Detection {
        image_id: rec.image_id,
        class,
        score: rec.score,
        bbox,
        mask,
    })
}

pub fn serialize_predictions(dets: &[Detection]) -> String {
    let records: Vec<Record> = dets
        .iter()
        .map(|d| Record {
            image_id: d.image_id.clone(),
            class: d.class.as_str().to_string(),
            score: d.score,
            bbox: [d.bbox.x(), d.bbox.y(), d.bbox.w(), d.bbox.h()],
            rle: d
                .mask
                .as_ref()
                .map(|m| serde_json::to_value(m).expect("RLE serializes")),
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&records).expect("records serialize");
    out.push('\n');
    out
}
