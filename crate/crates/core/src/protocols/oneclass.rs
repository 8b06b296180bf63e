//! Per-user one-class verification: a detector enrolled on one participant's
//! first sequences must reject every other participant.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{accept_rate, calibrate_threshold, compute_eer, rate_curve, reject_rate, Direction};
use super::report::{config_hash, Curve, EvalReport, Stat, Summary, Task, UnitResult};
use super::{par_units, pct, Pipeline, ProtocolError};
use crate::detectors::DetectorConfig;
use crate::preprocess::{Exclusion, Series, WindowedSample};
use crate::rng::{derive_path, derive_seed, rng_from_seed};
use crate::trace::{Label, MotionTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneclassConfig {
    pub pipeline: Pipeline,
    pub detector: DetectorConfig,
    pub enroll: usize,
    pub inner_folds: usize,
    pub repeats: usize,
    pub percentile: f64,
    pub seed: u64,
}

impl OneclassConfig {
    pub fn new(pipeline: Pipeline, detector: DetectorConfig, seed: u64) -> Self {
        Self {
            pipeline,
            detector,
            enroll: 10,
            inner_folds: 2,
            repeats: 5,
            percentile: 99.0,
            seed,
        }
    }
}

pub fn oneclass_run(traces: &[MotionTrace], cfg: &OneclassConfig) -> Result<EvalReport, ProtocolError> {
    let (samples, excluded) = cfg.pipeline.prepare(traces)?;
    oneclass_on_samples(&samples, excluded, cfg)
}

pub fn oneclass_on_samples(
    samples: &[WindowedSample],
    mut excluded: Vec<Exclusion>,
    cfg: &OneclassConfig,
) -> Result<EvalReport, ProtocolError> {
    if cfg.enroll == 0 || cfg.inner_folds < 2 || cfg.repeats == 0 || cfg.enroll < cfg.inner_folds {
        return Err(ProtocolError::InvalidConfig(
            "enroll >= inner_folds >= 2 and repeats >= 1 required".into(),
        ));
    }
    // Bona fide sequences per participant, in corpus order.
    let mut by_user: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        if let (Label::Bonafide, Some(p)) = (s.label, s.participant_id) {
            by_user.entry(p).or_default().push(i);
        }
    }
    let users: Vec<u32> = by_user
        .iter()
        .filter(|(p, idx)| {
            let ok = idx.len() > cfg.enroll;
            if !ok {
                log::warn!(
                    "excluding participant {p}: {} sequences, {} needed",
                    idx.len(),
                    cfg.enroll + 1
                );
            }
            ok
        })
        .map(|(&p, _)| p)
        .collect();
    for (p, idx) in &by_user {
        if idx.len() <= cfg.enroll {
            excluded.push(Exclusion {
                trace_id: format!("participant:{p}"),
                reason: format!("{} sequences, {} needed for enrollment", idx.len(), cfg.enroll + 1),
            });
        }
    }
    if users.is_empty() {
        return Err(ProtocolError::NoEligibleUsers(cfg.enroll + 1));
    }
    let gather = |idx: &[usize]| -> Vec<Series> { idx.iter().map(|&i| samples[i].values.clone()).collect() };

    let outcomes = par_units(users.len(), |u| {
        let pid = users[u];
        let seed = derive_seed(cfg.seed, pid as u64);
        let own = &by_user[&pid];
        let (enroll, probes) = own.split_at(cfg.enroll);
        let impostors: Vec<usize> = by_user
            .iter()
            .filter(|(&p, _)| p != pid)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();

        let mut calibration = Vec::with_capacity(cfg.enroll * cfg.repeats);
        for r in 0..cfg.repeats {
            let mut order = enroll.to_vec();
            order.shuffle(&mut rng_from_seed(derive_path(seed, &[1, r as u64])));
            for f in 0..cfg.inner_folds {
                let (held, fit): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
                    order.iter().copied().enumerate().partition(|(j, _)| j % cfg.inner_folds == f);
                let fit: Vec<usize> = fit.into_iter().map(|(_, i)| i).collect();
                let held: Vec<usize> = held.into_iter().map(|(_, i)| i).collect();
                let model = cfg
                    .detector
                    .fit(&gather(&fit), derive_path(seed, &[2, r as u64, f as u64]))?;
                calibration.extend(model.score_many(&gather(&held))?);
            }
        }
        let mut threshold = calibrate_threshold(&calibration, cfg.percentile, Direction::RejectAbove)?;
        threshold.meta.folds = cfg.inner_folds;
        threshold.meta.repeats = cfg.repeats;

        let model = cfg.detector.fit(&gather(enroll), derive_path(seed, &[0]))?;
        let started = Instant::now();
        let genuine = model.score_many(&gather(probes))?;
        let impostor = model.score_many(&gather(&impostors))?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let frr = reject_rate(&genuine, &threshold);
        let far = if impostor.is_empty() { 0.0 } else { accept_rate(&impostor, &threshold) };
        let eer = if impostor.is_empty() {
            None
        } else {
            // Negate so higher means more genuine.
            let g: Vec<f64> = genuine.iter().map(|s| -s).collect();
            let i: Vec<f64> = impostor.iter().map(|s| -s).collect();
            Some(pct(compute_eer(&g, &i)?.eer))
        };
        Ok((
            UnitResult {
                index: u,
                seed,
                participant_id: Some(pid),
                threshold,
                frr_pct: pct(frr),
                far_pct: pct(far),
                eer_pct: eer,
                far_by_type_pct: BTreeMap::new(),
                n_genuine: genuine.len(),
                n_impostor: impostor.len(),
                train_participants: Vec::new(),
                test_participants: Vec::new(),
            },
            Curve {
                unit: u,
                points: rate_curve(&genuine, &impostor, Direction::RejectAbove),
            },
            genuine.len() + impostor.len(),
            ms,
        ))
    })?;

    let units: Vec<UnitResult> = outcomes.iter().map(|o| o.0.clone()).collect();
    let eers: Vec<f64> = units.iter().filter_map(|u| u.eer_pct).collect();
    let summary = Summary {
        frr_pct: Stat::of(&units.iter().map(|u| u.frr_pct).collect::<Vec<_>>()),
        far_pct: Stat::of(&units.iter().map(|u| u.far_pct).collect::<Vec<_>>()),
        eer_pct: (!eers.is_empty()).then(|| Stat::of(&eers)),
        far_by_type_pct: BTreeMap::new(),
    };
    let config = serde_json::to_value(cfg).expect("config serializes");
    let probes: usize = outcomes.iter().map(|o| o.2).sum();
    let ms: f64 = outcomes.iter().map(|o| o.3).sum();
    Ok(EvalReport {
        task: Task::Oneclass,
        method: cfg.detector.kind().as_str().to_string(),
        config_hash: config_hash(&config),
        config,
        seed: cfg.seed,
        units,
        per_user: Vec::new(),
        summary,
        excluded,
        curves: outcomes.into_iter().map(|o| o.1).collect(),
        ms_per_probe: (probes > 0).then(|| ms / probes as f64),
    })
}
