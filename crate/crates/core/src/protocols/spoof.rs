//! Genuine-vs-spoof screening: detectors train on bona fide traces only and
//! are scored on held-out participants and on the fixed attack set.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{calibrate_threshold, rate_curve, reject_rate, accept_rate, Direction};
use super::report::{config_hash, Curve, EvalReport, Stat, Summary, Task, UnitResult};
use super::split::{group_kfold, group_split};
use super::{mean, par_units, pct, Pipeline, ProtocolError};
use crate::detectors::DetectorConfig;
use crate::preprocess::{Exclusion, Series, WindowedSample};
use crate::rng::{derive_path, derive_seed};
use crate::trace::{AttackType, Label, MotionTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofConfig {
    pub pipeline: Pipeline,
    pub detector: DetectorConfig,
    pub resamples: usize,
    pub percentile: f64,
    pub train_fraction: f64,
    pub inner_folds: usize,
    pub seed: u64,
}

impl SpoofConfig {
    pub fn new(pipeline: Pipeline, detector: DetectorConfig, seed: u64) -> Self {
        Self {
            pipeline,
            detector,
            resamples: 5,
            percentile: 99.0,
            train_fraction: 0.8,
            inner_folds: 5,
            seed,
        }
    }
}

/// Participant assignment for one resample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub index: usize,
    pub seed: u64,
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    /// Held-out participants of each inner calibration fold.
    pub inner: Vec<Vec<u32>>,
}

fn bonafide_participants(samples: &[WindowedSample]) -> Vec<u32> {
    samples
        .iter()
        .filter(|s| s.label == Label::Bonafide)
        .filter_map(|s| s.participant_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn plan_spoof(samples: &[WindowedSample], cfg: &SpoofConfig) -> Result<Vec<ResamplePlan>, ProtocolError> {
    let participants = bonafide_participants(samples);
    (0..cfg.resamples)
        .map(|r| {
            let seed = derive_seed(cfg.seed, r as u64);
            let (train, test) = group_split(&participants, cfg.train_fraction, derive_path(seed, &[2]))?;
            let inner = group_kfold(&train, cfg.inner_folds, derive_path(seed, &[3]))?;
            Ok(ResamplePlan {
                index: r,
                seed,
                train,
                test,
                inner,
            })
        })
        .collect()
}

/// Indices of the samples a resample may train on: bona fide traces of
/// training participants. Verifies the leakage guard before returning.
pub fn spoof_training_indices(samples: &[WindowedSample], plan: &ResamplePlan) -> Result<Vec<usize>, ProtocolError> {
    let idx: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            let s = &samples[i];
            s.label == Label::Bonafide && s.participant_id.is_some_and(|p| plan.train.binary_search(&p).is_ok())
        })
        .collect();
    if let Some(p) = plan.train.iter().find(|p| plan.test.binary_search(p).is_ok()) {
        return Err(ProtocolError::Leakage(format!("participant {p} on both sides")));
    }
    if let Some(&i) = idx.iter().find(|&&i| samples[i].label != Label::Bonafide) {
        return Err(ProtocolError::Leakage(format!(
            "attack trace {} in training",
            samples[i].trace_id
        )));
    }
    Ok(idx)
}

fn gather(samples: &[WindowedSample], idx: &[usize]) -> Vec<Series> {
    idx.iter().map(|&i| samples[i].values.clone()).collect()
}

pub fn spoof_screening_run(traces: &[MotionTrace], cfg: &SpoofConfig) -> Result<EvalReport, ProtocolError> {
    let (samples, excluded) = cfg.pipeline.prepare(traces)?;
    spoof_on_samples(&samples, excluded, cfg)
}

struct ResampleOutcome {
    unit: UnitResult,
    curve: Curve,
    probes: usize,
    scoring_ms: f64,
}

pub fn spoof_on_samples(
    samples: &[WindowedSample],
    excluded: Vec<Exclusion>,
    cfg: &SpoofConfig,
) -> Result<EvalReport, ProtocolError> {
    if cfg.resamples == 0 {
        return Err(ProtocolError::InvalidConfig("resamples must be >= 1".into()));
    }
    let attacks: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label == Label::Attack)
        .collect();
    if attacks.is_empty() {
        return Err(ProtocolError::EmptyAttackSet);
    }
    let attack_types: Vec<AttackType> = AttackType::PROXIES
        .into_iter()
        .filter(|t| attacks.iter().any(|&i| samples[i].attack_type == *t))
        .collect();
    let attack_series = gather(samples, &attacks);
    let plans = plan_spoof(samples, cfg)?;

    let outcomes = par_units(plans.len(), |r| {
        let plan = &plans[r];
        let train_idx = spoof_training_indices(samples, plan)?;

        // Inner out-of-fold scores calibrate the threshold.
        let mut calibration = Vec::with_capacity(train_idx.len());
        for (f, held) in plan.inner.iter().enumerate() {
            let (fit_idx, held_idx): (Vec<usize>, Vec<usize>) = train_idx
                .iter()
                .partition(|&&i| held.binary_search(&samples[i].participant_id.unwrap()).is_err());
            let model = cfg.detector.fit(&gather(samples, &fit_idx), derive_path(plan.seed, &[1, f as u64]))?;
            calibration.extend(model.score_many(&gather(samples, &held_idx))?);
        }
        let mut threshold = calibrate_threshold(&calibration, cfg.percentile, Direction::RejectAbove)?;
        threshold.meta.folds = cfg.inner_folds;
        threshold.meta.repeats = 1;

        let model = cfg.detector.fit(&gather(samples, &train_idx), derive_path(plan.seed, &[0]))?;
        let test_idx: Vec<usize> = (0..samples.len())
            .filter(|&i| {
                samples[i].label == Label::Bonafide
                    && samples[i].participant_id.is_some_and(|p| plan.test.binary_search(&p).is_ok())
            })
            .collect();
        let started = Instant::now();
        let genuine = model.score_many(&gather(samples, &test_idx))?;
        let attack_scores = model.score_many(&attack_series)?;
        let scoring_ms = started.elapsed().as_secs_f64() * 1e3;

        let frr = reject_rate(&genuine, &threshold);
        let mut far_by_type = BTreeMap::new();
        for t in &attack_types {
            let scores: Vec<f64> = attacks
                .iter()
                .zip(&attack_scores)
                .filter(|(&i, _)| samples[i].attack_type == *t)
                .map(|(_, &s)| s)
                .collect();
            far_by_type.insert(t.as_str().to_string(), pct(accept_rate(&scores, &threshold)));
        }
        let far = mean(&far_by_type.values().copied().collect::<Vec<_>>());
        Ok(ResampleOutcome {
            unit: UnitResult {
                index: r,
                seed: plan.seed,
                participant_id: None,
                threshold,
                frr_pct: pct(frr),
                far_pct: far,
                eer_pct: None,
                far_by_type_pct: far_by_type,
                n_genuine: genuine.len(),
                n_impostor: attack_scores.len(),
                train_participants: plan.train.clone(),
                test_participants: plan.test.clone(),
            },
            curve: Curve {
                unit: r,
                points: rate_curve(&genuine, &attack_scores, Direction::RejectAbove),
            },
            probes: genuine.len() + attack_scores.len(),
            scoring_ms,
        })
    })?;

    let units: Vec<UnitResult> = outcomes.iter().map(|o| o.unit.clone()).collect();
    let collect = |f: &dyn Fn(&UnitResult) -> f64| Stat::of(&units.iter().map(f).collect::<Vec<_>>());
    let far_by_type_pct = attack_types
        .iter()
        .map(|t| (t.as_str().to_string(), collect(&|u| u.far_by_type_pct[t.as_str()])))
        .collect();
    let summary = Summary {
        frr_pct: collect(&|u| u.frr_pct),
        far_pct: collect(&|u| u.far_pct),
        eer_pct: None,
        far_by_type_pct,
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    let probes: usize = outcomes.iter().map(|o| o.probes).sum();
    let ms: f64 = outcomes.iter().map(|o| o.scoring_ms).sum();
    Ok(EvalReport {
        task: Task::Spoof,
        method: cfg.detector.kind().as_str().to_string(),
        config_hash: config_hash(&config),
        config,
        seed: cfg.seed,
        units,
        per_user: Vec::new(),
        summary,
        excluded,
        curves: outcomes.into_iter().map(|o| o.curve).collect(),
        ms_per_probe: (probes > 0).then(|| ms / probes as f64),
    })
}
