//! FTC = 1 - d(prediction, one-hot target) for three choices of d.

use serde::{Deserialize, Serialize};

use crate::error::ArgumentError;
use crate::model::{BranchId, LabelDistribution, NliLabel};

/// Floor applied to the target probability before taking its log.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Ground distance between N and either of E, C.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.5
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { alpha: default_alpha() }
    }
}

impl MetricConfig {
    pub fn new(alpha: f64) -> Result<Self, ArgumentError> {
        let c = MetricConfig { alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ArgumentError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ArgumentError(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FtcVariant {
    Delta,
    Kl,
    Wasserstein,
}

impl FtcVariant {
    pub const ALL: [FtcVariant; 3] = [FtcVariant::Delta, FtcVariant::Kl, FtcVariant::Wasserstein];

    pub fn short_name(self) -> &'static str {
        match self {
            FtcVariant::Delta => "FTC-δ",
            FtcVariant::Kl => "FTC-K",
            FtcVariant::Wasserstein => "FTC-W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtcScore {
    pub variant: FtcVariant,
    pub value: f64,
    pub branch: BranchId,
}

/// 1 if the prediction's argmax (ties to the lower label) is `y_cf`.
pub fn ftc_delta(pred: &LabelDistribution, y_cf: NliLabel, _config: &MetricConfig) -> f64 {
    if pred.argmax() == y_cf {
        1.0
    } else {
        0.0
    }
}

/// `1 - KL(onehot(y_cf) || pred) = 1 + ln pred(y_cf)`.
pub fn ftc_kl(pred: &LabelDistribution, y_cf: NliLabel, _config: &MetricConfig) -> f64 {
    1.0 + pred.prob(y_cf).max(KL_FLOOR).ln()
}

pub fn ground_distance(a: NliLabel, b: NliLabel, alpha: f64) -> f64 {
    use NliLabel::*;
    match (a, b) {
        _ if a == b => 0.0,
        (E, C) | (C, E) => 1.0,
        _ => alpha,
    }
}

/// One minus the 1-Wasserstein distance from `pred` to a point mass at `y_cf`.
pub fn ftc_wasserstein(pred: &LabelDistribution, y_cf: NliLabel, config: &MetricConfig) -> f64 {
    let cost: f64 = NliLabel::ALL
        .into_iter()
        .filter(|l| *l != y_cf)
        .map(|l| pred.prob(l) * ground_distance(l, y_cf, config.alpha))
        .sum();
    1.0 - cost
}

/// Lowest FTC-W attainable for `y_cf`: all mass on the farthest label.
pub fn ftc_wasserstein_floor(y_cf: NliLabel, config: &MetricConfig) -> f64 {
    let worst = NliLabel::ALL.into_iter().map(|l| ground_distance(l, y_cf, config.alpha)).fold(0.0, f64::max);
    1.0 - worst
}

pub fn ftc_scores(pred: &LabelDistribution, y_cf: NliLabel, branch: BranchId, config: &MetricConfig) -> [FtcScore; 3] {
    [
        FtcScore { variant: FtcVariant::Delta, value: ftc_delta(pred, y_cf, config), branch },
        FtcScore { variant: FtcVariant::Kl, value: ftc_kl(pred, y_cf, config), branch },
        FtcScore { variant: FtcVariant::Wasserstein, value: ftc_wasserstein(pred, y_cf, config), branch },
    ]
}
