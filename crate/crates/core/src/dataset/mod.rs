//! Annotated images, the four-part anatomy taxonomy, and the file formats
//! and transforms that operate on them.

mod predictions;
mod raster;
mod rle;
mod transform;
mod via;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{GridDims, Polygon};

pub use predictions::{parse_predictions, serialize_predictions, Detection};
pub use raster::{gaussian_blur, gaussian_kernel, read_pgm, write_pgm, Grid};
pub use rle::{decode_rle, encode_rle, RleMask};
pub use transform::{augment, hflip, rescale, AugmentConfig, DEFAULT_TARGET};
pub use via::{parse_via, serialize_via, validate_via, DEFAULT_CLASS_KEY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnatomyClass {
    Thorax = 0,
    Abdomen = 1,
    Wing = 2,
    Leg = 3,
}

impl AnatomyClass {
    /// Report order.
    pub const ALL: [AnatomyClass; 4] = [
        AnatomyClass::Thorax,
        AnatomyClass::Abdomen,
        AnatomyClass::Wing,
        AnatomyClass::Leg,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Case-insensitive; plural "wings"/"legs" map to the singular class.
    pub fn from_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "thorax" => Some(Self::Thorax),
            "abdomen" => Some(Self::Abdomen),
            "wing" | "wings" => Some(Self::Wing),
            "leg" | "legs" => Some(Self::Leg),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Thorax => "thorax",
            Self::Abdomen => "abdomen",
            Self::Wing => "wing",
            Self::Leg => "leg",
        }
    }

    /// Capitalized row label used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Self::Thorax => "Thorax",
            Self::Abdomen => "Abdomen",
            Self::Wing => "Wing",
            Self::Leg => "Leg",
        }
    }
}

impl fmt::Display for AnatomyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRegion {
    pub class: AnatomyClass,
    pub polygon: Polygon,
}

/// Where an augmented copy came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub flipped: bool,
    pub blur_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub id: String,
    pub dims: GridDims,
    pub regions: Vec<AnnotatedRegion>,
    pub provenance: Option<Provenance>,
}

impl AnnotatedImage {
    pub fn new(id: impl Into<String>, dims: GridDims, regions: Vec<AnnotatedRegion>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidAnnotation {
                image: id,
                reason: "empty image id".into(),
            });
        }
        Ok(Self {
            id,
            dims,
            regions,
            provenance: None,
        })
    }

    /// Same image ignoring the id and provenance.
    pub fn same_content(&self, other: &AnnotatedImage) -> bool {
        self.dims == other.dims && self.regions == other.regions
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotatedDataset {
    images: Vec<AnnotatedImage>,
}

impl AnnotatedDataset {
    pub fn new(images: Vec<AnnotatedImage>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(images.len());
        for img in &images {
            if !seen.insert(img.id.as_str()) {
                return Err(Error::DuplicateImage(img.id.clone()));
            }
        }
        Ok(Self { images })
    }

    pub fn images(&self) -> &[AnnotatedImage] {
        &self.images
    }

    pub fn image(&self, id: &str) -> Option<&AnnotatedImage> {
        self.images.iter().find(|img| img.id == id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn into_images(self) -> Vec<AnnotatedImage> {
        self.images
    }
}

/// Region counts per class plus the number of images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub images: usize,
    pub thorax: usize,
    pub abdomen: usize,
    pub wing: usize,
    pub leg: usize,
}

impl ClassCounts {
    pub fn get(&self, class: AnatomyClass) -> usize {
        match class {
            AnatomyClass::Thorax => self.thorax,
            AnatomyClass::Abdomen => self.abdomen,
            AnatomyClass::Wing => self.wing,
            AnatomyClass::Leg => self.leg,
        }
    }

    fn bump(&mut self, class: AnatomyClass) {
        match class {
            AnatomyClass::Thorax => self.thorax += 1,
            AnatomyClass::Abdomen => self.abdomen += 1,
            AnatomyClass::Wing => self.wing += 1,
            AnatomyClass::Leg => self.leg += 1,
        }
    }
}

pub fn dataset_stats(ds: &AnnotatedDataset) -> ClassCounts {
    let mut counts = ClassCounts {
        images: ds.len(),
        ..Default::default()
    };
    for region in ds.images().iter().flat_map(|img| &img.regions) {
        counts.bump(region.class);
    }
    counts
}
