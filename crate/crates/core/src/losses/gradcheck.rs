//! Central finite-difference checks of the analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{bce, cce, focal, mask_loss, regressor_loss, smooth_l1, FocalConfig};
use crate::anchors::RegressionTarget;
use crate::dataset::Grid;
use crate::error::Result;
use crate::geometry::BitMask;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;

/// Interior sampling bounds for probabilities.
const P_RANGE: (f64, f64) = (0.01, 0.99);
/// Residuals closer than this to the smooth-L1 kink are resampled.
const KINK_MARGIN: f64 = 1e-3;
const MASK_SIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum Kernel {
    Cce,
    Bce,
    Focal { gamma: f64 },
    SmoothL1,
    RegressorLoss,
    MaskLoss { gamma: f64 },
}

impl Kernel {
    pub fn name(&self) -> String {
        match self {
            Kernel::Cce => "cce".into(),
            Kernel::Bce => "bce".into(),
            Kernel::Focal { gamma } => format!("focal(gamma={gamma})"),
            Kernel::SmoothL1 => "smooth_l1".into(),
            Kernel::RegressorLoss => "regressor_loss".into(),
            Kernel::MaskLoss { gamma } => format!("mask_loss(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub kernel: String,
    pub samples: usize,
    pub max_rel_error: f64,
    /// Argument at which the worst error occurred.
    pub worst_at: Vec<f64>,
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

struct Worst {
    err: f64,
    at: Vec<f64>,
}

impl Worst {
    fn new() -> Self {
        Self { err: 0.0, at: Vec::new() }
    }

    fn record(&mut self, analytic: f64, numeric: f64, at: &[f64]) {
        let err = relative_error(analytic, numeric);
        if err > self.err || self.at.is_empty() {
            self.err = err;
            self.at = at.to_vec();
        }
    }
}

fn probability(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(P_RANGE.0..P_RANGE.1)
}

fn residual(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-5.0..5.0);
        if (x.abs() - 1.0).abs() > KINK_MARGIN {
            return x;
        }
    }
}

/// Check one kernel at `samples` random interior points.
pub fn check_kernel(kernel: Kernel, samples: usize, seed: u64) -> Result<KernelCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    for _ in 0..samples {
        match kernel {
            Kernel::Cce => {
                let p = probability(&mut rng);
                let numeric = central_difference(|p| cce(p).map_or(f64::NAN, |l| l.value), p);
                worst.record(cce(p)?.grad, numeric, &[p]);
            }
            Kernel::Bce => {
                let p = probability(&mut rng);
                let positive = rng.gen_bool(0.5);
                let numeric = central_difference(|p| bce(p, positive).map_or(f64::NAN, |l| l.value), p);
                worst.record(bce(p, positive)?.grad, numeric, &[p, positive as u8 as f64]);
            }
            Kernel::Focal { gamma } => {
                let cfg = FocalConfig::new(gamma)?;
                let p = probability(&mut rng);
                let numeric = central_difference(|p| focal(p, cfg).map_or(f64::NAN, |l| l.value), p);
                worst.record(focal(p, cfg)?.grad, numeric, &[p]);
            }
            Kernel::SmoothL1 => {
                let x = residual(&mut rng);
                let numeric = central_difference(|x| smooth_l1(x).value, x);
                worst.record(smooth_l1(x).grad, numeric, &[x]);
            }
            Kernel::RegressorLoss => {
                let star = [0.0; 4].map(|_| rng.gen_range(-3.0..3.0));
                let pred: [f64; 4] = std::array::from_fn(|i| star[i] - residual(&mut rng));
                let target = |v: [f64; 4]| RegressionTarget::new(v[0], v[1], v[2], v[3]);
                let t_star = target(star)?;
                let analytic = regressor_loss(&target(pred)?, &t_star).grad;
                for i in 0..4 {
                    let numeric = central_difference(
                        |v| {
                            let mut moved = pred;
                            moved[i] = v;
                            target(moved).map_or(f64::NAN, |t| regressor_loss(&t, &t_star).value)
                        },
                        pred[i],
                    );
                    let mut at = pred.to_vec();
                    at.extend_from_slice(&star);
                    worst.record(analytic[i], numeric, &at);
                }
            }
            Kernel::MaskLoss { gamma } => {
                let cfg = FocalConfig::new(gamma)?;
                let n = MASK_SIDE * MASK_SIDE;
                let values: Vec<f64> = (0..n).map(|_| probability(&mut rng)).collect();
                let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                let gt = BitMask::from_bits(MASK_SIDE, MASK_SIDE, bits)?;
                let pred = Grid::new(MASK_SIDE, MASK_SIDE, values.clone())?;
                let analytic = mask_loss(&pred, &gt, cfg)?.grad;
                for i in 0..n {
                    let numeric = central_difference(
                        |v| {
                            let mut moved = values.clone();
                            moved[i] = v;
                            Grid::new(MASK_SIDE, MASK_SIDE, moved)
                                .and_then(|g| mask_loss(&g, &gt, cfg))
                                .map_or(f64::NAN, |l| l.value)
                        },
                        values[i],
                    );
                    worst.record(analytic.data()[i], numeric, &values);
                }
            }
        }
    }
    Ok(KernelCheck {
        kernel: kernel.name(),
        samples,
        max_rel_error: worst.err,
        worst_at: worst.at,
    })
}

/// Every kernel, with focal and mask loss checked at each gamma.
pub fn check_all(gammas: &[f64], samples: usize, seed: u64) -> Result<Vec<KernelCheck>> {
    let mut kernels = vec![Kernel::Cce, Kernel::Bce];
    kernels.extend(gammas.iter().map(|&gamma| Kernel::Focal { gamma }));
    kernels.extend([Kernel::SmoothL1, Kernel::RegressorLoss]);
    kernels.extend(gammas.iter().map(|&gamma| Kernel::MaskLoss { gamma }));
    kernels
        .into_iter()
        .enumerate()
        .map(|(i, k)| check_kernel(k, samples, seed.wrapping_add(i as u64)))
        .collect()
}

/// Largest `|focal(p) - cce(p)|` over random probabilities.
pub fn focal_cce_gap(gamma: f64, samples: usize, seed: u64) -> Result<f64> {
    let cfg = FocalConfig::new(gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = 0.0_f64;
    for _ in 0..samples {
        let p = probability(&mut rng);
        gap = gap.max((focal(p, cfg)?.value - cce(p)?.value).abs());
    }
    Ok(gap)
}
