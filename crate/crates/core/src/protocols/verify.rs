//! Classification-based verification: a closed-set classifier's probability
//! for the claimed identity is the verification score.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{accept_rate, calibrate_threshold, compute_eer, rate_curve, reject_rate, Direction};
use super::report::{config_hash, Curve, EvalReport, Stat, Summary, Task, UnitResult, UserResult};
use super::split::{check_stratification, stratified_kfold};
use super::{mean, par_units, pct, Pipeline, ProtocolError};
use crate::classifiers::ClassifierConfig;
use crate::preprocess::{Exclusion, Series, WindowedSample};
use crate::rng::{derive_path, derive_seed};
use crate::trace::{Label, MotionTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub pipeline: Pipeline,
    pub classifier: ClassifierConfig,
    pub outer_folds: usize,
    pub inner_repeats: usize,
    /// Target FRR in percent; the threshold is this percentile of the
    /// out-of-fold genuine scores.
    pub target_frr: f64,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(pipeline: Pipeline, classifier: ClassifierConfig, seed: u64) -> Self {
        Self {
            pipeline,
            classifier,
            outer_folds: 5,
            inner_repeats: 5,
            target_frr: 1.0,
            seed,
        }
    }
}

pub fn tsc_verification_run(traces: &[MotionTrace], cfg: &VerifyConfig) -> Result<EvalReport, ProtocolError> {
    let (samples, excluded) = cfg.pipeline.prepare(traces)?;
    tsc_verification_on_samples(&samples, excluded, cfg)
}

struct FoldOutcome {
    unit: UnitResult,
    users: Vec<UserResult>,
    curve: Curve,
    probes: usize,
    ms: f64,
}

/// Per-user FRR/FAR at `threshold` and EER, from the trial matrix
/// `scores[sample][class]`.
fn per_user(
    classes: &[u32],
    truth: &[u32],
    scores: &[Vec<f64>],
    threshold: &super::Threshold,
) -> Result<Vec<UserResult>, ProtocolError> {
    let mut out = Vec::new();
    for (c, &id) in classes.iter().enumerate() {
        let genuine: Vec<f64> = truth
            .iter()
            .zip(scores)
            .filter(|(&t, _)| t == id)
            .map(|(_, s)| s[c])
            .collect();
        let impostor: Vec<f64> = truth
            .iter()
            .zip(scores)
            .filter(|(&t, _)| t != id)
            .map(|(_, s)| s[c])
            .collect();
        if genuine.is_empty() || impostor.is_empty() {
            continue;
        }
        out.push(UserResult {
            participant_id: id,
            frr_pct: pct(reject_rate(&genuine, threshold)),
            far_pct: pct(accept_rate(&impostor, threshold)),
            eer_pct: pct(compute_eer(&genuine, &impostor)?.eer),
        });
    }
    Ok(out)
}

pub fn tsc_verification_on_samples(
    samples: &[WindowedSample],
    excluded: Vec<Exclusion>,
    cfg: &VerifyConfig,
) -> Result<EvalReport, ProtocolError> {
    if cfg.outer_folds < 2 || cfg.inner_repeats == 0 {
        return Err(ProtocolError::InvalidConfig(
            "outer_folds >= 2 and inner_repeats >= 1 required".into(),
        ));
    }
    let idx: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].label == Label::Bonafide && samples[i].participant_id.is_some())
        .collect();
    let labels: Vec<u32> = idx.iter().map(|&i| samples[i].participant_id.unwrap()).collect();
    let series: Vec<Series> = idx.iter().map(|&i| samples[i].values.clone()).collect();
    let outer = stratified_kfold(&labels, cfg.outer_folds, derive_seed(cfg.seed, 0))?;
    check_stratification(&labels, &outer, cfg.outer_folds)?;

    let outcomes = par_units(cfg.outer_folds, |f| {
        let seed = derive_path(cfg.seed, &[1, f as u64]);
        let train: Vec<usize> = (0..labels.len()).filter(|&i| outer[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| outer[i] == f).collect();
        let train_labels: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &l in &train_labels {
            *counts.entry(l).or_default() += 1;
        }
        let inner_k = if counts.values().all(|&n| n >= 3) { 3 } else { 2 };

        let mut calibration = Vec::new();
        for r in 0..cfg.inner_repeats {
            let split_seed = derive_path(seed, &[1, r as u64]);
            let inner = stratified_kfold(&train_labels, inner_k, split_seed)?;
            check_stratification(&train_labels, &inner, inner_k)?;
            for g in 0..inner_k {
                let fit: Vec<usize> = (0..train.len()).filter(|&j| inner[j] != g).collect();
                let held: Vec<usize> = (0..train.len()).filter(|&j| inner[j] == g).collect();
                let model = cfg.classifier.fit(
                    &fit.iter().map(|&j| series[train[j]].clone()).collect::<Vec<_>>(),
                    &fit.iter().map(|&j| train_labels[j]).collect::<Vec<_>>(),
                    derive_seed(split_seed, g as u64),
                )?;
                for &j in &held {
                    calibration.push(model.verification_score(&series[train[j]], train_labels[j])?);
                }
            }
        }
        let mut threshold = calibrate_threshold(&calibration, cfg.target_frr, Direction::RejectBelow)?;
        threshold.meta.folds = inner_k;
        threshold.meta.repeats = cfg.inner_repeats;

        let model = cfg.classifier.fit(
            &train.iter().map(|&i| series[i].clone()).collect::<Vec<_>>(),
            &train_labels,
            derive_path(seed, &[0]),
        )?;
        let started = Instant::now();
        let scores: Vec<Vec<f64>> = test
            .iter()
            .map(|&i| model.predict_proba(&series[i]))
            .collect::<Result<_, _>>()?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let truth: Vec<u32> = test.iter().map(|&i| labels[i]).collect();
        let classes = model.classes();
        let users = per_user(classes, &truth, &scores, &threshold)?;

        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for (t, row) in truth.iter().zip(&scores) {
            for (c, &s) in classes.iter().zip(row) {
                if c == t {
                    genuine.push(s);
                } else {
                    impostor.push(s);
                }
            }
        }
        let macro_of = |f: fn(&UserResult) -> f64| mean(&users.iter().map(f).collect::<Vec<_>>());
        let unit = UnitResult {
            index: f,
            seed,
            participant_id: None,
            threshold,
            frr_pct: macro_of(|u| u.frr_pct),
            far_pct: macro_of(|u| u.far_pct),
            eer_pct: Some(macro_of(|u| u.eer_pct)),
            far_by_type_pct: BTreeMap::new(),
            n_genuine: genuine.len(),
            n_impostor: impostor.len(),
            train_participants: Vec::new(),
            test_participants: Vec::new(),
        };
        Ok(FoldOutcome {
            unit,
            users,
            curve: Curve {
                unit: f,
                points: rate_curve(&genuine, &impostor, Direction::RejectBelow),
            },
            probes: test.len(),
            ms,
        })
    })?;

    let units: Vec<UnitResult> = outcomes.iter().map(|o| o.unit.clone()).collect();
    let mut pooled: BTreeMap<u32, Vec<&UserResult>> = BTreeMap::new();
    for o in &outcomes {
        for u in &o.users {
            pooled.entry(u.participant_id).or_default().push(u);
        }
    }
    let per_user: Vec<UserResult> = pooled
        .into_iter()
        .map(|(id, rs)| {
            let avg = |f: fn(&UserResult) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            UserResult {
                participant_id: id,
                frr_pct: avg(|u| u.frr_pct),
                far_pct: avg(|u| u.far_pct),
                eer_pct: avg(|u| u.eer_pct),
            }
        })
        .collect();
    let stat = |f: fn(&UnitResult) -> f64| Stat::of(&units.iter().map(f).collect::<Vec<_>>());
    let summary = Summary {
        frr_pct: stat(|u| u.frr_pct),
        far_pct: stat(|u| u.far_pct),
        eer_pct: Some(stat(|u| u.eer_pct.unwrap())),
        far_by_type_pct: BTreeMap::new(),
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    let probes: usize = outcomes.iter().map(|o| o.probes).sum();
    let ms: f64 = outcomes.iter().map(|o| o.ms).sum();
    Ok(EvalReport {
        task: Task::Verify,
        method: cfg.classifier.kind().as_str().to_string(),
        config_hash: config_hash(&config),
        config,
        seed: cfg.seed,
        units,
        per_user,
        summary,
        excluded,
        curves: outcomes.into_iter().map(|o| o.curve).collect(),
        ms_per_probe: (probes > 0).then(|| ms / probes as f64),
    })
}
