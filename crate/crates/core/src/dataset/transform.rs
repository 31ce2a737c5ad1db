//! Geometric preprocessing and seeded augmentation of annotated images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedDataset, AnnotatedImage, AnnotatedRegion, Provenance};
use crate::error::{Error, Result};
use crate::geometry::GridDims;

pub const DEFAULT_TARGET: GridDims = GridDims {
    width: 1024,
    height: 1024,
};

/// Scale every vertex by the per-axis ratio of `target` to the current dims.
pub fn rescale(img: &AnnotatedImage, target: GridDims) -> Result<AnnotatedImage> {
    if img.dims == target {
        return Ok(img.clone());
    }
    let sx = target.width as f64 / img.dims.width as f64;
    let sy = target.height as f64 / img.dims.height as f64;
    map_regions(img, target, |x, y| (x * sx, y * sy))
}

/// Mirror left to right: `x -> width - x`.
pub fn hflip(img: &AnnotatedImage) -> Result<AnnotatedImage> {
    let w = img.dims.width as f64;
    map_regions(img, img.dims, |x, y| (w - x, y))
}

fn map_regions(
    img: &AnnotatedImage,
    dims: GridDims,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> Result<AnnotatedImage> {
    let regions = img
        .regions
        .iter()
        .map(|r| {
            Ok(AnnotatedRegion {
                class: r.class,
                polygon: r.polygon.map_vertices(&f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnnotatedImage {
        id: img.id.clone(),
        dims,
        regions,
        provenance: img.provenance.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Augmented copies emitted per source image.
    pub copies: usize,
    pub flip_prob: f64,
    /// Blur sigma drawn uniformly from `[lo, hi]`; 0 means no blur.
    pub sigma_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            copies: 2,
            flip_prob: 0.5,
            sigma_range: (0.0, 1.5),
        }
    }
}

impl AugmentConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!("flip_prob {} outside [0, 1]", self.flip_prob)));
        }
        let (lo, hi) = self.sigma_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::Config(format!("sigma range [{lo}, {hi}] is not valid")));
        }
        Ok(())
    }
}

/// Each source image followed by `cfg.copies` augmented copies named
/// `<stem>_aug<k><ext>`. The blur sigma of a copy is recorded in its
/// provenance since annotations carry no pixels to blur.
///
/// Randomness comes from ChaCha8 seeded with `seed`, drawing two uniform
/// variates per copy (flip, then sigma) in image order.
pub fn augment(ds: &AnnotatedDataset, seed: u64, cfg: &AugmentConfig) -> Result<AnnotatedDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = cfg.sigma_range;
    let mut out = Vec::with_capacity(ds.len() * (cfg.copies + 1));
    for img in ds.images() {
        out.push(img.clone());
        for k in 1..=cfg.copies {
            let flipped = rng.gen::<f64>() < cfg.flip_prob;
            let sigma = lo + rng.gen::<f64>() * (hi - lo);
            let mut copy = if flipped { hflip(img)? } else { img.clone() };
            copy.id = copy_id(&img.id, k);
            copy.provenance = Some(Provenance {
                source: img.id.clone(),
                flipped,
                blur_sigma: sigma,
            });
            out.push(copy);
        }
    }
    AnnotatedDataset::new(out)
}

fn copy_id(id: &str, k: usize) -> String {
    match id.rfind('.') {
        Some(dot) if dot > 0 => format!("{}_aug{k}{}", &id[..dot], &id[dot..]),
        _ => format!("{id}_aug{k}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AnatomyClass;
    use crate::geometry::{polygon_area, rasterize_polygon, Polygon};

    fn image(dims: (usize, usize), verts: &[(f64, f64)]) -> AnnotatedImage {
        AnnotatedImage::new(
            "img.jpg",
            GridDims::new(dims.0, dims.1).unwrap(),
            vec![AnnotatedRegion {
                class: AnatomyClass::Wing,
                polygon: Polygon::new(verts.to_vec()).unwrap(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn rescale_examples() {
        let img = image((2048, 2048), &[(0.0, 0.0), (100.0, 0.0), (100.0, 60.0)]);
        assert_eq!(rescale(&img, img.dims).unwrap(), img);

        let half = rescale(&img, DEFAULT_TARGET).unwrap();
        assert_eq!(half.dims, DEFAULT_TARGET);
        assert_eq!(half.regions[0].polygon.vertices(), [(0.0, 0.0), (50.0, 0.0), (50.0, 30.0)]);

        let wide = image((2048, 1024), &[(0.0, 0.0), (100.0, 0.0), (100.0, 60.0)]);
        let sq = rescale(&wide, DEFAULT_TARGET).unwrap();
        assert_eq!(sq.regions[0].polygon.vertices(), [(0.0, 0.0), (50.0, 0.0), (50.0, 60.0)]);
    }

    #[test]
    fn rescale_preserves_relative_area() {
        let img = image((640, 480), &[(10.0, 20.0), (300.0, 45.0), (250.0, 400.0), (33.0, 321.0)]);
        let out = rescale(&img, DEFAULT_TARGET).unwrap();
        let before = polygon_area(&img.regions[0].polygon) / (640.0 * 480.0);
        let after = polygon_area(&out.regions[0].polygon) / (1024.0 * 1024.0);
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn hflip_examples() {
        let img = image((20, 10), &[(0.0, 3.0), (7.0, 3.0), (7.0, 9.0)]);
        let once = hflip(&img).unwrap();
        assert_eq!(once.regions[0].polygon.vertices()[0], (20.0, 3.0));
        assert_eq!(once.regions[0].class, AnatomyClass::Wing);
        assert_eq!(hflip(&once).unwrap(), img);
    }

    #[test]
    fn centered_square_is_flip_symmetric() {
        let img = image((20, 10), &[(6.0, 2.0), (14.0, 2.0), (14.0, 8.0), (6.0, 8.0)]);
        let flipped = hflip(&img).unwrap();
        let a = rasterize_polygon(&img.regions[0].polygon, img.dims);
        let b = rasterize_polygon(&flipped.regions[0].polygon, img.dims);
        assert_eq!(a, b);
        assert_eq!(a.count(), 48);
    }

    #[test]
    fn augment_is_seeded() {
        let ds = AnnotatedDataset::new(vec![image((32, 32), &[(1.0, 1.0), (9.0, 1.0), (5.0, 6.0)])]).unwrap();
        let cfg = AugmentConfig::default();
        let a = augment(&ds, 7, &cfg).unwrap();
        assert_eq!(a, augment(&ds, 7, &cfg).unwrap());
        assert_eq!(a.len(), 3);
        assert_eq!(a.images()[1].id, "img_aug1.jpg");
        assert_eq!(a.images()[2].provenance.as_ref().unwrap().source, "img.jpg");
    }

    #[test]
    fn degenerate_augment_copies_originals() {
        let ds = AnnotatedDataset::new(vec![image((32, 32), &[(1.0, 1.0), (9.0, 1.0), (5.0, 6.0)])]).unwrap();
        let cfg = AugmentConfig {
            copies: 2,
            flip_prob: 0.0,
            sigma_range: (0.0, 0.0),
        };
        let out = augment(&ds, 1, &cfg).unwrap();
        for copy in &out.images()[1..] {
            assert!(copy.same_content(&ds.images()[0]));
            let p = copy.provenance.as_ref().unwrap();
            assert!(!p.flipped);
            assert_eq!(p.blur_sigma, 0.0);
        }
    }

    #[test]
    fn augment_rejects_bad_config() {
        let ds = AnnotatedDataset::default();
        let bad = AugmentConfig {
            flip_prob: 1.5,
            ..Default::default()
        };
        assert!(augment(&ds, 0, &bad).is_err());
        let bad = AugmentConfig {
            sigma_range: (2.0, 1.0),
            ..Default::default()
        };
        assert!(augment(&ds, 0, &bad).is_err());
    }

    #[test]
    fn copy_ids() {
        assert_eq!(copy_id("a.b.jpg", 2), "a.b_aug2.jpg");
        assert_eq!(copy_id("noext", 1), "noext_aug1");
        assert_eq!(copy_id(".hidden", 1), ".hidden_aug1");
    }
}
