//! Boxes, polygons and bit-masks, plus the IoU measures built on them.
//!
//! Boxes are real-valued `(x, y, w, h)` with `(x, y)` the top-left corner.
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` and belongs to a region when
//! its center `(i + 0.5, j + 0.5)` does.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "non-finite box ({x}, {y}, {w}, {h})"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "box needs positive extent, got w={w} h={h}"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    /// Box spanning two corners, `x1 > x0` and `y1 > y0`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Clip to `[0, width] x [0, height]`; `None` when nothing remains.
    pub fn clip(&self, grid: GridDims) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(grid.width as f64);
        let y1 = self.bottom().min(grid.height as f64);
        BoundingBox::from_corners(x0, y0, x1, y1).ok()
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon {
            vertices: vec![
                (self.x, self.y),
                (self.right(), self.y),
                (self.right(), self.bottom()),
                (self.x, self.bottom()),
            ],
        }
    }

    /// Half-open pixel index ranges whose centers fall inside the box,
    /// clipped to the grid.
    pub(crate) fn pixel_span(&self, grid: GridDims) -> (usize, usize, usize, usize) {
        let (x0, x1) = center_span(self.x, self.right(), grid.width);
        let (y0, y1) = center_span(self.y, self.bottom(), grid.height);
        (x0, x1, y0, y1)
    }
}

/// Indices `i` in `0..limit` with `lo <= i + 0.5 < hi`.
fn center_span(lo: f64, hi: f64, limit: usize) -> (usize, usize) {
    let first = first_center_at_or_after(lo).min(limit);
    let end = first_center_at_or_after(hi).min(limit);
    (first, end.max(first))
}

/// Smallest non-negative `i` with `i + 0.5 >= v`.
fn first_center_at_or_after(v: f64) -> usize {
    if v <= 0.5 {
        return 0;
    }
    let mut i = (v - 0.5).ceil() as usize;
    while i > 0 && (i - 1) as f64 + 0.5 >= v {
        i -= 1;
    }
    while (i as f64) + 0.5 < v {
        i += 1;
    }
    i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite polygon vertex".into()));
        }
        let poly = Self { vertices };
        if poly.signed_area() == 0.0 {
            return Err(Error::InvalidGeometry("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (x0, y0) = self.vertices[i];
                let (x1, y1) = self.vertices[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum();
        0.5 * twice
    }

    /// Tightest real-valued box around the vertices.
    pub fn bounding_box(&self) -> Result<BoundingBox> {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.vertices {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::from_corners(x0, y0, x1, y1)
    }

    /// Apply `f` to every vertex and revalidate.
    pub fn map_vertices(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().map(|&(x, y)| f(x, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn empty(grid: GridDims) -> Self {
        Self {
            width: grid.width,
            height: grid.height,
            bits: vec![false; grid.area()],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        GridDims::new(width, height)?;
        if bits.len() != width * height {
            return Err(Error::InvalidGeometry(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> GridDims {
        GridDims {
            width: self.width,
            height: self.height,
        }
    }

    /// Row-major bits.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Mirror left to right.
    pub fn flipped_horizontally(&self) -> BitMask {
        let mut out = BitMask::empty(self.dims());
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}

pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over union of two same-sized masks; 0 when both are empty.
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.signed_area().abs()
}

/// Scanline fill under the even-odd rule, sampling pixel centers.
pub fn rasterize_polygon(poly: &Polygon, grid: GridDims) -> BitMask {
    let mut mask = BitMask::empty(grid);
    let verts = poly.vertices();
    let n = verts.len();
    let mut crossings = Vec::with_capacity(n);
    for j in 0..grid.height {
        let yc = j as f64 + 0.5;
        crossings.clear();
        for k in 0..n {
            let (xa, ya) = verts[k];
            let (xb, yb) = verts[(k + n - 1) % n];
            if (ya > yc) != (yb > yc) {
                crossings.push((xb - xa) * (yc - ya) / (yb - ya) + xa);
            }
        }
        crossings.sort_by(|a, b| a.total_cmp(b));
        for pair in crossings.chunks_exact(2) {
            let (start, end) = center_span(pair[0], pair[1], grid.width);
            let row = j * grid.width;
            mask.bits[row + start..row + end].fill(true);
        }
    }
    mask
}

/// Tightest integer-aligned box around the set pixels.
pub fn mask_to_bbox(mask: &BitMask) -> Result<BoundingBox> {
    let (mut x0, mut y0) = (usize::MAX, usize::MAX);
    let (mut x1, mut y1) = (0usize, 0usize);
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyRegion);
    }
    BoundingBox::new(
        x0 as f64,
        y0 as f64,
        (x1 - x0 + 1) as f64,
        (y1 - y0 + 1) as f64,
    )
}
