//! Built-in defaults, read from `config/defaults.toml`.

use serde::Deserialize;

use crate::anchors::{AnchorConfig, MatchThresholds};
use crate::dataset::AugmentConfig;
use crate::error::{Error, Result};
use crate::geometry::GridDims;
use crate::losses::FocalConfig;
use crate::metrics::IouKind;

pub const DEFAULTS_TOML: &str = include_str!("../config/defaults.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Defaults {
    pub evaluation: EvaluationDefaults,
    pub losses: LossDefaults,
    pub anchors: AnchorConfig,
    pub matching: MatchingDefaults,
    pub augmentation: AugmentationDefaults,
    pub training: TrainingSchedule,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EvaluationDefaults {
    pub thresholds: Vec<f64>,
    pub iou_kind: IouKind,
    pub class_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LossDefaults {
    pub focal_gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct MatchingDefaults {
    pub positive: f64,
    pub negative: f64,
    pub nms_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct AugmentationDefaults {
    pub copies: usize,
    pub flip_prob: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub target_width: usize,
    pub target_height: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrainingSchedule {
    pub layers: usize,
    pub optimizer: String,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub learning_rate: Vec<LearningRateStage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LearningRateStage {
    pub first_epoch: usize,
    pub last_epoch: usize,
    pub rate: f64,
}

impl TrainingSchedule {
    /// Learning rate in effect at a 1-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> Option<f64> {
        self.learning_rate
            .iter()
            .find(|s| (s.first_epoch..=s.last_epoch).contains(&epoch))
            .map(|s| s.rate)
    }
}

impl Defaults {
    pub fn builtin() -> Self {
        Self::parse(DEFAULTS_TOML).expect("bundled defaults are valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let d: Defaults = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        d.anchors.validate()?;
        FocalConfig::new(d.losses.focal_gamma)?;
        if d.evaluation.thresholds.is_empty() || d.evaluation.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::Config("evaluation thresholds must lie in (0, 1]".into()));
        }
        Ok(d)
    }

    pub fn focal(&self) -> FocalConfig {
        FocalConfig {
            gamma: self.losses.focal_gamma,
        }
    }

    pub fn match_thresholds(&self) -> MatchThresholds {
        MatchThresholds {
            positive: self.matching.positive,
            negative: self.matching.negative,
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            copies: self.augmentation.copies,
            flip_prob: self.augmentation.flip_prob,
            sigma_range: (self.augmentation.sigma_min, self.augmentation.sigma_max),
        }
    }

    pub fn rescale_target(&self) -> Result<GridDims> {
        GridDims::new(self.augmentation.target_width, self.augmentation.target_height)
    }
}
