use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BitMask;

/// Row-major run lengths, alternating zeros and ones, starting with the
/// (possibly zero) count of leading zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRle")]
pub struct RleMask {
    width: usize,
    height: usize,
    runs: Vec<usize>,
}

#[derive(Deserialize)]
struct RawRle {
    width: usize,
    height: usize,
    runs: Vec<usize>,
}

impl TryFrom<RawRle> for RleMask {
    type Error = Error;

    fn try_from(raw: RawRle) -> Result<Self> {
        RleMask::new(raw.width, raw.height, raw.runs)
    }
}

impl RleMask {
    pub fn new(width: usize, height: usize, runs: Vec<usize>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRle(format!("dimensions {width}x{height}")));
        }
        let total: usize = runs.iter().sum();
        if total != width * height {
            return Err(Error::InvalidRle(format!(
                "runs sum to {total}, expected {}",
                width * height
            )));
        }
        if let Some(pos) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(Error::InvalidRle(format!("zero-length run at index {}", pos + 1)));
        }
        Ok(Self { width, height, runs })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn runs(&self) -> &[usize] {
        &self.runs
    }

    /// Set pixels, without decoding.
    pub fn area(&self) -> usize {
        self.runs.iter().skip(1).step_by(2).sum()
    }
}

pub fn encode_rle(mask: &BitMask) -> RleMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0usize;
    for &bit in mask.bits() {
        if bit != current {
            runs.push(len);
            len = 0;
            current = bit;
        }
        len += 1;
    }
    runs.push(len);
    RleMask {
        width: mask.width(),
        height: mask.height(),
        runs,
    }
}

pub fn decode_rle(rle: &RleMask) -> Result<BitMask> {
    let mut bits = Vec::with_capacity(rle.width * rle.height);
    let mut value = false;
    for &run in &rle.runs {
        bits.extend(std::iter::repeat(value).take(run));
        value = !value;
    }
    BitMask::from_bits(rle.width, rle.height, bits)
}
