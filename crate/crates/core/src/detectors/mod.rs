//! Whole-series anomaly detectors trained on bona fide samples only.
//! Every detector reports higher scores for more anomalous probes.

mod dtw;
mod iforest;
mod knn;
mod rockad;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dtw::dtw_distance;
pub use iforest::{average_path_length, IsolationForest};
pub use knn::{euclidean, knn_score, knn_score_rows, mean_k_smallest, Metric};
pub use rockad::Rockad;

use crate::features::{common_shape, quant_features, FeatureError, QuantConfig};
use crate::preprocess::Series;
use crate::protocols::Direction;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("probe shape {found:?} does not match training shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("channel count mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Rockad,
    IforestRaw,
    IforestQuant,
    KnnEuclid,
    KnnDtw,
    KnnQuant,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Rockad,
        DetectorKind::IforestRaw,
        DetectorKind::IforestQuant,
        DetectorKind::KnnEuclid,
        DetectorKind::KnnDtw,
        DetectorKind::KnnQuant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Rockad => "rockad",
            DetectorKind::IforestRaw => "iforest_raw",
            DetectorKind::IforestQuant => "iforest_quant",
            DetectorKind::KnnEuclid => "knn_euclid",
            DetectorKind::KnnDtw => "knn_dtw",
            DetectorKind::KnnQuant => "knn_quant",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            DetectorKind::Rockad => "ROCKAD",
            DetectorKind::IforestRaw => "IF (raw)",
            DetectorKind::IforestQuant => "QUANT-IF",
            DetectorKind::KnnEuclid => "Eucl. 3-NN",
            DetectorKind::KnnDtw => "3-NN DTW",
            DetectorKind::KnnQuant => "QUANT 3-NN",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DetectorError::InvalidConfig(format!("unknown detector `{s}`")))
    }
}

/// Hyperparameters for one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    Rockad {
        n_estimators: usize,
        n_kernels: usize,
        k: usize,
    },
    IforestRaw {
        n_trees: usize,
        subsample: Option<usize>,
    },
    IforestQuant {
        n_trees: usize,
        subsample: Option<usize>,
        quant: QuantConfig,
    },
    KnnEuclid {
        k: usize,
    },
    KnnDtw {
        k: usize,
        band: Option<f64>,
    },
    KnnQuant {
        k: usize,
        quant: QuantConfig,
    },
}

impl DetectorConfig {
    /// Benchmark defaults for each kind.
    pub fn default_for(kind: DetectorKind) -> Self {
        match kind {
            DetectorKind::Rockad => Self::Rockad {
                n_estimators: 24,
                n_kernels: 1024,
                k: 3,
            },
            DetectorKind::IforestRaw => Self::IforestRaw {
                n_trees: 1500,
                subsample: None,
            },
            DetectorKind::IforestQuant => Self::IforestQuant {
                n_trees: 1500,
                subsample: None,
                quant: QuantConfig::default(),
            },
            DetectorKind::KnnEuclid => Self::KnnEuclid { k: 3 },
            DetectorKind::KnnDtw => Self::KnnDtw { k: 3, band: None },
            DetectorKind::KnnQuant => Self::KnnQuant {
                k: 3,
                quant: QuantConfig::default(),
            },
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Self::Rockad { .. } => DetectorKind::Rockad,
            Self::IforestRaw { .. } => DetectorKind::IforestRaw,
            Self::IforestQuant { .. } => DetectorKind::IforestQuant,
            Self::KnnEuclid { .. } => DetectorKind::KnnEuclid,
            Self::KnnDtw { .. } => DetectorKind::KnnDtw,
            Self::KnnQuant { .. } => DetectorKind::KnnQuant,
        }
    }

    /// Training samples needed by [`DetectorConfig::fit`].
    pub fn min_train(&self) -> usize {
        match *self {
            Self::Rockad { k, .. } => k + 1,
            Self::IforestRaw { .. } | Self::IforestQuant { .. } => 2,
            Self::KnnEuclid { k } | Self::KnnDtw { k, .. } | Self::KnnQuant { k, .. } => k,
        }
    }

    pub fn fit(&self, train: &[Series], seed: u64) -> Result<FittedDetector, DetectorError> {
        if train.len() < self.min_train() {
            return Err(DetectorError::TooFewSamples {
                needed: self.min_train(),
                found: train.len(),
            });
        }
        let input_shape = match self {
            // DTW references may differ in length; channels must agree.
            Self::KnnDtw { .. } => {
                let m = train[0].n_channels();
                if let Some(bad) = train.iter().find(|s| s.n_channels() != m) {
                    return Err(DetectorError::ChannelMismatch {
                        left: m,
                        right: bad.n_channels(),
                    });
                }
                train[0].shape()
            }
            _ => common_shape(train)?,
        };
        let state = match *self {
            Self::Rockad {
                n_estimators,
                n_kernels,
                k,
            } => State::Rockad(Rockad::fit(train, n_estimators, n_kernels, k, seed)?),
            Self::IforestRaw { n_trees, subsample } => {
                let rows: Vec<Vec<f64>> = train.iter().map(|s| s.as_flat().to_vec()).collect();
                State::Forest(IsolationForest::fit(&rows, n_trees, subsample, seed)?)
            }
            Self::IforestQuant {
                n_trees,
                subsample,
                quant,
            } => {
                let rows = quant_rows(train, &quant)?;
                State::Forest(IsolationForest::fit(&rows, n_trees, subsample, seed)?)
            }
            Self::KnnEuclid { .. } => {
                State::Rows(train.iter().map(|s| s.as_flat().to_vec()).collect())
            }
            Self::KnnDtw { band, .. } => {
                if let Some(f) = band {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(DetectorError::InvalidConfig(format!("dtw band {f} outside (0, 1]")));
                    }
                }
                State::Samples(train.to_vec())
            }
            Self::KnnQuant { quant, .. } => State::Rows(quant_rows(train, &quant)?),
        };
        Ok(FittedDetector {
            config: *self,
            seed,
            input_shape,
            state,
        })
    }
}

fn quant_rows(samples: &[Series], quant: &QuantConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    samples.par_iter().map(|s| quant_features(s, quant)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum State {
    Rockad(Rockad),
    Forest(IsolationForest),
    Rows(Vec<Vec<f64>>),
    Samples(Vec<Series>),
}

/// An immutable trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDetector {
    config: DetectorConfig,
    seed: u64,
    input_shape: (usize, usize),
    state: State,
}

impl FittedDetector {
    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn kind(&self) -> DetectorKind {
        self.config.kind()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    /// Anomaly scores reject above the threshold.
    pub fn direction(&self) -> Direction {
        Direction::RejectAbove
    }

    pub fn as_rockad(&self) -> Option<&Rockad> {
        match &self.state {
            State::Rockad(r) => Some(r),
            _ => None,
        }
    }

    fn check_shape(&self, probe: &Series) -> Result<(), DetectorError> {
        let ok = if matches!(self.config, DetectorConfig::KnnDtw { .. }) {
            probe.n_channels() == self.input_shape.1
        } else {
            probe.shape() == self.input_shape
        };
        if ok {
            Ok(())
        } else {
            Err(DetectorError::ShapeMismatch {
                expected: self.input_shape,
                found: probe.shape(),
            })
        }
    }

    pub fn score(&self, probe: &Series) -> Result<f64, DetectorError> {
        self.check_shape(probe)?;
        match (&self.state, self.config) {
            (State::Rockad(r), _) => r.score(probe),
            (State::Forest(f), DetectorConfig::IforestQuant { quant, .. }) => {
                f.score(&quant_features(probe, &quant)?)
            }
            (State::Forest(f), _) => f.score(probe.as_flat()),
            (State::Rows(rows), DetectorConfig::KnnQuant { k, quant }) => {
                knn_score_rows(rows, &quant_features(probe, &quant)?, k)
            }
            (State::Rows(rows), DetectorConfig::KnnEuclid { k }) => knn_score_rows(rows, probe.as_flat(), k),
            (State::Samples(refs), DetectorConfig::KnnDtw { k, band }) => {
                knn_score(refs, probe, k, Metric::Dtw { band })
            }
            _ => unreachable!("detector state does not match its config"),
        }
    }

    /// Scores probes in parallel, preserving order.
    pub fn score_many(&self, probes: &[Series]) -> Result<Vec<f64>, DetectorError> {
        probes.par_iter().map(|p| self.score(p)).collect()
    }
}
