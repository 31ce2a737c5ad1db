//! Scalar loss kernels with analytic first derivatives.
//!
//! Logs are natural. Probabilities equal to zero are rejected rather than
//! clamped so the kernels stay exact for gradient checks; callers clamp if
//! they need to.

pub mod gradcheck;

use serde::{Deserialize, Serialize};

use crate::anchors::RegressionTarget;
use crate::dataset::Grid;
use crate::error::{Error, Result};
use crate::geometry::BitMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Derivative with respect to the kernel's argument.
    pub grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
}

impl Default for FocalConfig {
    fn default() -> Self {
        Self { gamma: 2.0 }
    }
}

impl FocalConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma >= 0.0 {
            Ok(Self { gamma })
        } else {
            Err(Error::domain(format!("focal gamma must be finite and >= 0, got {gamma}")))
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("probability {p} outside (0, 1]")))
    }
}

/// `-ln p` for the probability assigned to the true class.
pub fn cce(p: f64) -> Result<LossValue> {
    check_probability(p)?;
    Ok(LossValue {
        value: -p.ln(),
        grad: -1.0 / p,
    })
}

/// Binary cross entropy for the probability `p` of the positive label.
pub fn bce(p: f64, positive: bool) -> Result<LossValue> {
    if positive {
        cce(p)
    } else {
        let q = 1.0 - p;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1) for a negative label")));
        }
        Ok(LossValue {
            value: -q.ln(),
            grad: 1.0 / q,
        })
    }
}

/// `-(1 - p)^gamma ln p`.
pub fn focal(p: f64, cfg: FocalConfig) -> Result<LossValue> {
    check_probability(p)?;
    let g = cfg.gamma;
    let q = 1.0 - p;
    let ln_p = p.ln();
    let modulated = q.powf(g);
    // d/dp (1-p)^g = -g (1-p)^(g-1); the product with ln p vanishes at p = 1
    // for every g > 0.
    let modulation_grad = if g == 0.0 || p == 1.0 { 0.0 } else { g * q.powf(g - 1.0) * ln_p };
    Ok(LossValue {
        value: -modulated * ln_p,
        grad: modulation_grad - modulated / p,
    })
}

pub fn smooth_l1(x: f64) -> LossValue {
    if x.abs() < 1.0 {
        LossValue {
            value: 0.5 * x * x,
            grad: x,
        }
    } else {
        LossValue {
            value: x.abs() - 0.5,
            grad: x.signum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorLoss {
    pub value: f64,
    /// Gradient with respect to the predicted `(tx, ty, tw, th)`.
    pub grad: [f64; 4],
}

/// Sum of smooth-L1 over the four residuals `t_star - t_pred`.
pub fn regressor_loss(t_pred: &RegressionTarget, t_star: &RegressionTarget) -> RegressorLoss {
    let pred = t_pred.as_array();
    let star = t_star.as_array();
    let mut value = 0.0;
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let term = smooth_l1(star[i] - pred[i]);
        value += term.value;
        grad[i] = -term.grad;
    }
    RegressorLoss { value, grad }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskLoss {
    pub value: f64,
    /// Gradient with respect to each predicted foreground probability.
    pub grad: Grid,
}

/// Mean per-pixel focal loss. Foreground pixels score `pred`, background
/// pixels score `1 - pred`; each of those must lie in `(0, 1]`.
pub fn mask_loss(pred: &Grid, gt: &BitMask, cfg: FocalConfig) -> Result<MaskLoss> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    let n = pred.data().len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.data().len());
    for (&p, &fg) in pred.data().iter().zip(gt.bits()) {
        let (p_t, sign) = if fg { (p, 1.0) } else { (1.0 - p, -1.0) };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("predicted probability {p} outside [0, 1]")));
        }
        let term = focal(p_t, cfg)?;
        total += term.value;
        grad.push(sign * term.grad / n);
    }
    Ok(MaskLoss {
        value: total / n,
        grad: Grid::new(pred.width(), pred.height(), grad)?,
    })
}
