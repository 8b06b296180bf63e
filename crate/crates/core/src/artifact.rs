//! Versioned on-disk model artifacts: a fitted detector or classifier bundled
//! with its preprocessing, window spec, channel selector and threshold.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierConfig, ClassifierError, FittedClassifier};
use crate::detectors::{DetectorConfig, FittedDetector};
use crate::preprocess::{window_trace, PreprocessConfig, Series, WindowSpec, WindowedSample};
use crate::protocols::{
    calibrate_threshold, group_kfold, stratified_kfold, Decision, Direction, Pipeline,
    ProtocolError, Threshold,
};
use crate::rng::{derive_path, derive_seed, rng_from_seed};
use crate::trace::{ChannelSelector, Label, MotionTrace};
use crate::{Error, Result};

pub const FORMAT: &str = "motiongate-model";
pub const VERSION: u32 = 1;
pub const ARTIFACT_EXTENSION: &str = "json";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("not a model artifact (format `{0}`)")]
    Format(String),
    #[error("artifact version {found} is newer than supported version {VERSION}")]
    UnsupportedVersion { found: u32 },
    #[error("malformed artifact: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("classifier models need a claimed participant id")]
    MissingClaim,
    #[error("invalid model id `{0}` (use letters, digits, `-`, `_`, `.`)")]
    InvalidId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedModel {
    Detector(FittedDetector),
    Classifier(FittedClassifier),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub model_id: String,
    pub preprocess: PreprocessConfig,
    pub window: WindowSpec,
    pub channels: ChannelSelector,
    pub threshold: Threshold,
    pub model: FittedModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub score: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub direction: Direction,
}

/// Model ids double as file stems.
pub fn validate_model_id(id: &str) -> Result<(), ArtifactError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ArtifactError::InvalidId(id.to_string()))
    }
}

impl ModelArtifact {
    pub fn new(model_id: &str, pipeline: &Pipeline, threshold: Threshold, model: FittedModel) -> Result<Self, ArtifactError> {
        validate_model_id(model_id)?;
        Ok(Self {
            format: FORMAT.to_string(),
            version: VERSION,
            model_id: model_id.to_string(),
            preprocess: pipeline.preprocess,
            window: pipeline.window,
            channels: pipeline.selector.clone(),
            threshold,
            model,
        })
    }

    pub fn kind(&self) -> &'static str {
        match &self.model {
            FittedModel::Detector(d) => d.kind().as_str(),
            FittedModel::Classifier(c) => c.config().map_or("uniform", |c| c.kind().as_str()),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let header: Header = serde_json::from_slice(bytes)?;
        if header.format != FORMAT {
            return Err(ArtifactError::Format(header.format));
        }
        if header.version > VERSION {
            return Err(ArtifactError::UnsupportedVersion { found: header.version });
        }
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(Self::from_json(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            preprocess: self.preprocess,
            window: self.window,
            selector: self.channels.clone(),
        }
    }

    /// Scores an already windowed sample.
    pub fn score_series(&self, values: &Series, claimed_id: Option<u32>) -> Result<ScoreOutcome> {
        let score = match &self.model {
            FittedModel::Detector(d) => d.score(values)?,
            FittedModel::Classifier(c) => {
                let id = claimed_id.ok_or(ArtifactError::MissingClaim)?;
                c.verification_score(values, id)?
            }
        };
        Ok(ScoreOutcome {
            score,
            threshold: self.threshold.value,
            decision: self.threshold.decide(score),
            direction: self.threshold.direction,
        })
    }

    /// Full path: condition, window, score, decide.
    pub fn score_trace(&self, trace: &MotionTrace, claimed_id: Option<u32>) -> Result<ScoreOutcome> {
        let sample = window_trace(trace, &self.preprocess, &self.window, &self.channels)?;
        self.score_series(&sample.values, claimed_id)
    }
}

/// Loads every `*.json` artifact in `dir`, sorted by file name. Artifacts
/// with a newer version are skipped with a warning; other failures are errors.
pub fn load_model_dir(dir: &Path) -> Result<BTreeMap<String, ModelArtifact>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ARTIFACT_EXTENSION))
        .collect();
    paths.sort();
    let mut models = BTreeMap::new();
    for path in paths {
        match ModelArtifact::load(&path) {
            Ok(a) => {
                if models.contains_key(&a.model_id) {
                    log::warn!("duplicate model id `{}` in {}; keeping the first", a.model_id, path.display());
                    continue;
                }
                models.insert(a.model_id.clone(), a);
            }
            Err(Error::Artifact(e @ ArtifactError::UnsupportedVersion { .. })) => {
                log::warn!("skipping {}: {e}", path.display());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(models)
}

fn series_of(samples: &[WindowedSample], idx: &[usize]) -> Vec<Series> {
    idx.iter().map(|&i| samples[i].values.clone()).collect()
}

/// Spoof-screening model: fits on every bona fide sample; the threshold
/// comes from participant-grouped out-of-fold scores.
pub fn train_spoof_model(
    samples: &[WindowedSample],
    detector: &DetectorConfig,
    folds: usize,
    percentile: f64,
    seed: u64,
) -> Result<(FittedDetector, Threshold)> {
    let train: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label == Label::Bonafide && samples[i].participant_id.is_some())
        .collect();
    let participants: Vec<u32> = train.iter().map(|&i| samples[i].participant_id.unwrap()).collect();
    let groups = group_kfold(&participants, folds, derive_seed(seed, 2))?;
    let mut calibration = Vec::new();
    for (f, held) in groups.iter().enumerate() {
        let (fit, out): (Vec<usize>, Vec<usize>) = train
            .iter()
            .partition(|&&i| held.binary_search(&samples[i].participant_id.unwrap()).is_err());
        let model = detector.fit(&series_of(samples, &fit), derive_path(seed, &[1, f as u64]))?;
        calibration.extend(model.score_many(&series_of(samples, &out))?);
    }
    let mut threshold = calibrate_threshold(&calibration, percentile, Direction::RejectAbove)?;
    threshold.meta.folds = folds;
    threshold.meta.repeats = 1;
    let model = detector.fit(&series_of(samples, &train), derive_path(seed, &[0]))?;
    Ok((model, threshold))
}

/// One-class model for `participant`: enrolls on their first `enroll` bona
/// fide samples; the threshold comes from repeated inner folds.
pub fn train_oneclass_model(
    samples: &[WindowedSample],
    detector: &DetectorConfig,
    participant: u32,
    enroll: usize,
    folds: usize,
    repeats: usize,
    percentile: f64,
    seed: u64,
) -> Result<(FittedDetector, Threshold)> {
    let own: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label == Label::Bonafide && samples[i].participant_id == Some(participant))
        .take(enroll)
        .collect();
    if own.len() < enroll || folds < 2 || enroll < folds {
        return Err(ProtocolError::NoEligibleUsers(enroll).into());
    }
    let mut calibration = Vec::new();
    for r in 0..repeats {
        let mut order = own.clone();
        order.shuffle(&mut rng_from_seed(derive_path(seed, &[1, r as u64])));
        for f in 0..folds {
            let fit: Vec<usize> = order.iter().enumerate().filter(|(j, _)| j % folds != f).map(|(_, &i)| i).collect();
            let held: Vec<usize> = order.iter().enumerate().filter(|(j, _)| j % folds == f).map(|(_, &i)| i).collect();
            let model = detector.fit(&series_of(samples, &fit), derive_path(seed, &[2, r as u64, f as u64]))?;
            calibration.extend(model.score_many(&series_of(samples, &held))?);
        }
    }
    let mut threshold = calibrate_threshold(&calibration, percentile, Direction::RejectAbove)?;
    threshold.meta.folds = folds;
    threshold.meta.repeats = repeats;
    let model = detector.fit(&series_of(samples, &own), derive_path(seed, &[0]))?;
    Ok((model, threshold))
}

/// Verification classifier over every bona fide participant; the threshold
/// targets `target_frr` percent on stratified out-of-fold genuine scores.
pub fn train_verify_model(
    samples: &[WindowedSample],
    classifier: &ClassifierConfig,
    folds: usize,
    target_frr: f64,
    seed: u64,
) -> Result<(FittedClassifier, Threshold)> {
    let train: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label == Label::Bonafide && samples[i].participant_id.is_some())
        .collect();
    let labels: Vec<u32> = train.iter().map(|&i| samples[i].participant_id.unwrap()).collect();
    let assignment = stratified_kfold(&labels, folds, derive_seed(seed, 2))?;
    let mut calibration = Vec::new();
    for f in 0..folds {
        let fit: Vec<usize> = (0..train.len()).filter(|&j| assignment[j] != f).collect();
        let held: Vec<usize> = (0..train.len()).filter(|&j| assignment[j] == f).collect();
        let model = classifier.fit(
            &fit.iter().map(|&j| samples[train[j]].values.clone()).collect::<Vec<_>>(),
            &fit.iter().map(|&j| labels[j]).collect::<Vec<_>>(),
            derive_path(seed, &[1, f as u64]),
        )?;
        for &j in &held {
            calibration.push(
                model
                    .verification_score(&samples[train[j]].values, labels[j])
                    .map_err(|e: ClassifierError| Error::from(e))?,
            );
        }
    }
    let mut threshold = calibrate_threshold(&calibration, target_frr, Direction::RejectBelow)?;
    threshold.meta.folds = folds;
    threshold.meta.repeats = 1;
    let model = classifier.fit(&series_of(samples, &train), &labels, derive_path(seed, &[0]))?;
    Ok((model, threshold))
}
