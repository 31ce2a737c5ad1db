//! VGG Image Annotator (VIA) JSON.
//!
//! Accepts both the bare region export (`{"<filename><size>": {...}}`) and a
//! full project file carrying `_via_img_metadata`. Regions may be a list
//! (VIA 2) or an object keyed by index (VIA 1). Image dimensions travel in
//! `file_attributes.width` / `file_attributes.height`; when absent they are
//! inferred from the polygon extents.

use serde_json::{json, Map, Number, Value};

use super::{AnatomyClass, AnnotatedDataset, AnnotatedImage, AnnotatedRegion, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{GridDims, Polygon};

pub const DEFAULT_CLASS_KEY: &str = "anatomy";

const PROJECT_METADATA_KEY: &str = "_via_img_metadata";

pub fn parse_via(doc: &str, class_key: &str) -> Result<AnnotatedDataset> {
    let (images, mut errors) = parse_collecting(doc, class_key)?;
    if !errors.is_empty() {
        return Err(errors.swap_remove(0));
    }
    AnnotatedDataset::new(images)
}

/// Every problem found in the document, in document order. Malformed JSON is
/// reported alone since nothing past it can be read.
pub fn validate_via(doc: &str, class_key: &str) -> Vec<Error> {
    match parse_collecting(doc, class_key) {
        Err(e) => vec![e],
        Ok((images, mut errors)) => {
            if let Err(e) = AnnotatedDataset::new(images) {
                errors.push(e);
            }
            errors
        }
    }
}

fn parse_collecting(doc: &str, class_key: &str) -> Result<(Vec<AnnotatedImage>, Vec<Error>)> {
    let root: Value = serde_json::from_str(doc).map_err(|e| json_error(doc, &e))?;
    let root = match root {
        Value::Object(mut map) => match map.remove(PROJECT_METADATA_KEY) {
            Some(Value::Object(meta)) => meta,
            Some(_) => return Err(structure("_via_img_metadata is not an object")),
            None => map,
        },
        _ => return Err(structure("top level must be an object")),
    };

    let mut images = Vec::with_capacity(root.len());
    let mut errors = Vec::new();
    for (key, entry) in &root {
        match parse_image(key, entry, class_key, &mut errors) {
            Some(img) => images.push(img),
            None => continue,
        }
    }
    Ok((images, errors))
}

fn parse_image(
    key: &str,
    entry: &Value,
    class_key: &str,
    errors: &mut Vec<Error>,
) -> Option<AnnotatedImage> {
    let invalid = |image: &str, reason: String| Error::InvalidAnnotation {
        image: image.to_string(),
        reason,
    };
    let Some(obj) = entry.as_object() else {
        errors.push(invalid(key, "image entry is not an object".into()));
        return None;
    };
    let id = match obj.get("filename").and_then(Value::as_str) {
        Some(name) if !name.is_empty() => name.to_string(),
        _ => {
            errors.push(invalid(key, "missing filename".into()));
            return None;
        }
    };

    let regions_json: Vec<&Value> = match obj.get("regions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(list)) => list.iter().collect(),
        Some(Value::Object(map)) => map.values().collect(),
        Some(_) => {
            errors.push(invalid(&id, "regions must be a list or object".into()));
            return None;
        }
    };

    let mut raw = Vec::with_capacity(regions_json.len());
    let mut failed = false;
    for (index, region) in regions_json.into_iter().enumerate() {
        match parse_region(&id, index, region, class_key) {
            Ok(r) => raw.push(r),
            Err(e) => {
                errors.push(e);
                failed = true;
            }
        }
    }

    let attrs = obj.get("file_attributes").and_then(Value::as_object);
    let dims = match read_dims(&id, attrs, &raw) {
        Ok(d) => d,
        Err(e) => {
            errors.push(e);
            return None;
        }
    };

    let mut regions = Vec::with_capacity(raw.len());
    for (index, (class, vertices)) in raw.into_iter().enumerate() {
        // Vertices outside the image are clamped onto its border.
        let clamped = vertices
            .into_iter()
            .map(|(x, y)| (x.clamp(0.0, dims.width as f64), y.clamp(0.0, dims.height as f64)))
            .collect();
        match Polygon::new(clamped) {
            Ok(polygon) => regions.push(AnnotatedRegion { class, polygon }),
            Err(e) => {
                errors.push(invalid(&id, format!("region {index}: {e}")));
                failed = true;
            }
        }
    }
    if failed {
        return None;
    }

    let provenance = attrs.and_then(read_provenance);
    Some(AnnotatedImage {
        id,
        dims,
        regions,
        provenance,
    })
}

type RawRegion = (AnatomyClass, Vec<(f64, f64)>);

fn parse_region(image: &str, index: usize, region: &Value, class_key: &str) -> Result<RawRegion> {
    let invalid = |reason: String| Error::InvalidAnnotation {
        image: image.to_string(),
        reason: format!("region {index}: {reason}"),
    };
    let shape = region
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or_else(|| invalid("missing shape_attributes".into()))?;
    let name = shape.get("name").and_then(Value::as_str).unwrap_or("");
    if name != "polygon" {
        return Err(Error::UnsupportedShape {
            shape: name.to_string(),
            image: image.to_string(),
        });
    }
    let xs = number_list(shape.get("all_points_x")).ok_or_else(|| invalid("bad all_points_x".into()))?;
    let ys = number_list(shape.get("all_points_y")).ok_or_else(|| invalid("bad all_points_y".into()))?;
    if xs.len() != ys.len() {
        return Err(invalid(format!(
            "all_points_x has {} entries but all_points_y has {}",
            xs.len(),
            ys.len()
        )));
    }

    let label = region
        .get("region_attributes")
        .and_then(|attrs| attrs.get(class_key))
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(format!("missing class label under {class_key:?}")))?;
    let class = AnatomyClass::from_label(label).ok_or_else(|| Error::UnknownClass {
        label: label.to_string(),
        image: image.to_string(),
    })?;
    Ok((class, xs.into_iter().zip(ys).collect()))
}

fn number_list(v: Option<&Value>) -> Option<Vec<f64>> {
    v?.as_array()?.iter().map(Value::as_f64).collect()
}

fn read_dims(
    image: &str,
    attrs: Option<&Map<String, Value>>,
    regions: &[RawRegion],
) -> Result<GridDims> {
    let field = |name: &str| -> Option<Value> { attrs.and_then(|a| a.get(name)).cloned() };
    let as_dim = |v: Value| -> Option<usize> {
        match v {
            Value::Number(n) => n.as_u64().map(|n| n as usize),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    };
    let bad = |what: &str| Error::InvalidAnnotation {
        image: image.to_string(),
        reason: format!("file_attributes.{what} must be a positive integer"),
    };
    let extent = |axis: fn(&(f64, f64)) -> f64| -> usize {
        let max = regions
            .iter()
            .flat_map(|(_, v)| v.iter().map(axis))
            .fold(0.0_f64, f64::max);
        (max.ceil() as usize).max(1)
    };
    let width = match field("width") {
        Some(v) => as_dim(v).ok_or_else(|| bad("width"))?,
        None => extent(|p| p.0),
    };
    let height = match field("height") {
        Some(v) => as_dim(v).ok_or_else(|| bad("height"))?,
        None => extent(|p| p.1),
    };
    GridDims::new(width, height).map_err(|e| Error::InvalidAnnotation {
        image: image.to_string(),
        reason: e.to_string(),
    })
}

fn read_provenance(attrs: &Map<String, Value>) -> Option<Provenance> {
    let source = attrs.get("augmented_from")?.as_str()?.to_string();
    Some(Provenance {
        source,
        flipped: attrs.get("flipped").and_then(Value::as_bool).unwrap_or(false),
        blur_sigma: attrs.get("blur_sigma").and_then(Value::as_f64).unwrap_or(0.0),
    })
}

/// Region-export dialect. Every image is keyed as `<filename>-1` (VIA's
/// convention for an unknown file size) and carries its dimensions.
pub fn serialize_via(ds: &AnnotatedDataset, class_key: &str) -> String {
    let mut root = Map::new();
    for img in ds.images() {
        let regions: Vec<Value> = img
            .regions
            .iter()
            .map(|r| {
                let (xs, ys): (Vec<Value>, Vec<Value>) =
                    r.polygon.vertices().iter().map(|&(x, y)| (number(x), number(y))).unzip();
                let mut attrs = Map::new();
                attrs.insert(class_key.to_string(), Value::from(r.class.as_str()));
                json!({
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": xs,
                        "all_points_y": ys,
                    },
                    "region_attributes": attrs,
                })
            })
            .collect();

        let mut file_attrs = Map::new();
        file_attrs.insert("width".into(), Value::from(img.dims.width));
        file_attrs.insert("height".into(), Value::from(img.dims.height));
        if let Some(p) = &img.provenance {
            file_attrs.insert("augmented_from".into(), Value::from(p.source.as_str()));
            file_attrs.insert("flipped".into(), Value::from(p.flipped));
            file_attrs.insert("blur_sigma".into(), number(p.blur_sigma));
        }

        root.insert(
            format!("{}-1", img.id),
            json!({
                "filename": img.id,
                "size": -1,
                "regions": regions,
                "file_attributes": file_attrs,
            }),
        );
    }
    let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
    out.push('\n');
    out
}

/// Integral coordinates are written without a fractional part, as VIA does.
fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::Number(Number::from(v as i64))
    } else {
        Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

fn structure(msg: &str) -> Error {
    Error::InvalidAnnotation {
        image: String::new(),
        reason: msg.to_string(),
    }
}

pub(crate) fn json_error(doc: &str, e: &serde_json::Error) -> Error {
    Error::Json {
        offset: byte_offset(doc, e.line(), e.column()),
        message: e.to_string(),
    }
}

fn byte_offset(doc: &str, line: usize, column: usize) -> usize {
    let line_start: usize = doc
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(doc.len())
}
