//! FTC scores and the comparison metrics LAS, LRA and METEOR.

pub mod ftc;
pub mod las;
pub mod meteor;

pub use ftc::{ftc_delta, ftc_kl, ftc_scores, ftc_wasserstein, ftc_wasserstein_floor, FtcScore, FtcVariant, MetricConfig};
pub use las::{las_scores, lra_score, LasInputs, LasScores, LraInputs};
pub use meteor::meteor;
