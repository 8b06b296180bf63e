//! The three evaluation protocols (spoof screening, one-class verification,
//! classification-based verification) with their splits, threshold
//! calibration and metrics.

mod metrics;
mod oneclass;
mod report;
mod split;
mod spoof;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    accept_rate, calibrate_threshold, compute_eer, percentile_sorted, rate_curve, reject_rate,
    CalibrationMeta, CurvePoint, Decision, Direction, EerPoint, Threshold, MIN_CALIBRATION_SCORES,
};
pub use oneclass::{oneclass_on_samples, oneclass_run, OneclassConfig};
pub use report::{config_hash, Curve, EvalReport, Stat, Summary, Task, UnitResult, UserResult};
pub use split::{check_stratification, group_kfold, group_split, stratified_kfold};
pub use spoof::{
    plan_spoof, spoof_on_samples, spoof_screening_run, spoof_training_indices, ResamplePlan,
    SpoofConfig,
};
pub use verify::{tsc_verification_on_samples, tsc_verification_run, VerifyConfig};

use crate::classifiers::ClassifierError;
use crate::detectors::DetectorError;
use crate::preprocess::{
    prepare_samples, Exclusion, PreprocessConfig, PreprocessError, WindowSpec, WindowedSample,
};
use crate::trace::{ChannelSelector, MotionTrace};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("need at least {needed} participants, found {found}")]
    TooFewParticipants { needed: usize, found: usize },
    #[error("no attack traces to evaluate")]
    EmptyAttackSet,
    #[error("no {0} scores")]
    EmptyScores(&'static str),
    #[error("non-finite score {0}")]
    NonFiniteScore(f64),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("no participant has enough sequences ({0} needed)")]
    NoEligibleUsers(usize),
    #[error("leakage guard violated: {0}")]
    Leakage(String),
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Conditioning, windowing and channel selection shared by every task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Pipeline {
    pub preprocess: PreprocessConfig,
    pub window: WindowSpec,
    pub selector: ChannelSelector,
}

impl Pipeline {
    pub fn prepare(&self, traces: &[MotionTrace]) -> Result<(Vec<WindowedSample>, Vec<Exclusion>), ProtocolError> {
        Ok(prepare_samples(traces, &self.preprocess, &self.window, &self.selector)?)
    }
}

fn pct(rate: f64) -> f64 {
    rate * 100.0
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs `f` over `0..n` in parallel, keeping order.
fn par_units<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T, ProtocolError> + Sync + Send,
) -> Result<Vec<T>, ProtocolError> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
