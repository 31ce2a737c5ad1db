//! Geometry, box regression, loss kernels and IoU-thresholded evaluation
//! for instance segmentation of insect anatomy (thorax, abdomen, wing, leg).
//!
//! * [`geometry`]: boxes, polygons, bit-masks, IoU, rasterization
//! * [`dataset`]: VIA annotations, prediction files, RLE masks, transforms
//! * [`anchors`]: anchor grids, box encoding, matching, NMS
//! * [`losses`]: cross entropy, focal and smooth-L1 kernels with gradients
//! * [`metrics`]: matching, precision/recall, AP, mAP and reports
//! * [`cli`]: the `anatomask` command line

pub mod anchors;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;

pub use error::{Error, Result};
