//! Oracles, fixtures and the per-criterion checks shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use motiongate::artifact::{self, FittedModel, ModelArtifact};
use motiongate::classifiers::{ClassifierConfig, LogisticObjective};
use motiongate::cli::{cmd_score, ScoreArgs};
use motiongate::detectors::{dtw_distance, DetectorConfig, DetectorKind};
use motiongate::features::{quant_features, quant_intervals, QuantConfig};
use motiongate::preprocess::{
    condition_trace, debias_magnetometer, Butterworth, PreprocessConfig, Representation, Series, WindowSpec,
};
use motiongate::protocols::{
    compute_eer, Decision, plan_spoof, spoof_on_samples, spoof_training_indices, Pipeline, ProtocolError, SpoofConfig,
};
use motiongate::rng::{derive_seed, rng_from_seed, Rng};
use motiongate::synthgen::{gen_corpus, write_synth_corpus, AttackCounts, SynthCorpus};
use motiongate::trace::{serialize_csv, serialize_meta, AttackType, ChannelSelector, Label, MotionTrace};
use rand::Rng as _;

pub type Check = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motiongate"))
}

pub fn synth_dir(participants: usize, seqs: usize, counts: AttackCounts, seed: u64) -> (tempfile::TempDir, SynthCorpus) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_corpus(participants, seqs, counts, seed).unwrap();
    write_synth_corpus(dir.path(), &corpus).unwrap();
    (dir, corpus)
}

fn random_series(rng: &mut Rng, len: usize, channels: usize) -> Series {
    Series::from_channels(
        (0..channels)
            .map(|_| (0..len).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
    )
}

// ---- criterion 1 ----------------------------------------------------------

fn row_cost(a: &Series, b: &Series, i: usize, j: usize) -> f64 {
    (0..a.n_channels())
        .map(|c| {
            let d = a.get(i, c) - b.get(j, c);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimum over every monotone alignment path, walked from the start so the
/// partial sums accumulate in the same order as the recurrence.
pub fn dtw_enumerate(a: &Series, b: &Series, width: Option<usize>) -> f64 {
    fn walk(a: &Series, b: &Series, width: Option<usize>, i: usize, j: usize, acc: f64) -> f64 {
        if i + 1 == a.len() && j + 1 == b.len() {
            return acc;
        }
        let mut best = f64::INFINITY;
        for (ni, nj) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
            if ni >= a.len() || nj >= b.len() || width.is_some_and(|w| ni.abs_diff(nj) > w) {
                continue;
            }
            best = best.min(walk(a, b, width, ni, nj, row_cost(a, b, ni, nj) + acc));
        }
        best
    }
    walk(a, b, width, 0, 0, row_cost(a, b, 0, 0))
}

pub fn check_dtw(cases: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let mut banded = 0;
    for case in 0..cases {
        let m = rng.random_range(1..=3);
        let (la, lb) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let a = random_series(&mut rng, la, m);
        let b = random_series(&mut rng, lb, m);
        let got = dtw_distance(&a, &b, None).map_err(|e| e.to_string())?;
        let want = dtw_enumerate(&a, &b, None);
        ensure(got == want, || format!("case {case}: dtw {got} vs enumeration {want}"))?;
        if a.len() > 1 && b.len() > 1 {
            let frac = 0.3;
            let w = ((frac * a.len().max(b.len()) as f64).ceil() as usize).max(a.len().abs_diff(b.len()));
            let got = dtw_distance(&a, &b, Some(frac)).map_err(|e| e.to_string())?;
            let want = dtw_enumerate(&a, &b, Some(w));
            ensure(got == want, || format!("case {case}: banded dtw {got} vs enumeration {want}"))?;
            banded += 1;
        }
    }
    Ok(format!("{cases} pairs exact, {banded} banded"))
}

/// Sweeps every distinct score and every midpoint, counting directly.
pub fn eer_sweep(genuine: &[f64], impostor: &[f64]) -> (f64, f64) {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut cands = Vec::new();
    for (i, &t) in all.iter().enumerate() {
        cands.push(t);
        if i + 1 < all.len() {
            cands.push(t + (all[i + 1] - t) / 2.0);
        }
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for t in cands {
        let frr = genuine.iter().filter(|&&g| g < t).count() as f64 / genuine.len() as f64;
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let gap = (frr - far).abs();
        if best.is_none_or(|(g, _, _)| gap < g) {
            best = Some((gap, (frr + far) / 2.0, t));
        }
    }
    let (_, eer, t) = best.unwrap();
    (eer, t)
}

pub fn check_eer(cases: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    for case in 0..cases {
        // Coarse grid so ties are common.
        let ng = rng.random_range(1..=12);
        let ni = rng.random_range(1..=12);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0..10) as f64 / 4.0).collect() };
        let g = draw(ng);
        let i = draw(ni);
        let got = compute_eer(&g, &i).map_err(|e| e.to_string())?;
        let (eer, t) = eer_sweep(&g, &i);
        ensure(got.eer == eer && got.threshold == t, || {
            format!("case {case}: eer {} at {} vs sweep {eer} at {t} ({g:?} / {i:?})", got.eer, got.threshold)
        })?;
    }
    Ok(format!("{cases} score sets exact"))
}

/// Mean of the k smallest of all pairwise flat Euclidean distances.
pub fn knn_naive(refs: &[Series], probe: &Series, k: usize) -> f64 {
    let mut d: Vec<f64> = refs
        .iter()
        .map(|r| {
            r.as_flat()
                .iter()
                .zip(probe.as_flat())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    d.sort_by(f64::total_cmp);
    d[..k].iter().sum::<f64>() / k as f64
}

pub fn check_knn(cases: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let mut probes = 0;
    for case in 0..cases {
        let (len, m) = (rng.random_range(2..20), rng.random_range(1..4));
        let refs: Vec<Series> = (0..rng.random_range(3..15)).map(|_| random_series(&mut rng, len, m)).collect();
        let k = rng.random_range(1..=3);
        let det = DetectorConfig::KnnEuclid { k }.fit(&refs, 0).map_err(|e| e.to_string())?;
        for p in 0..5 {
            // Every second probe is a reference itself.
            let probe = if p % 2 == 0 { refs[p % refs.len()].clone() } else { random_series(&mut rng, len, m) };
            let got = det.score(&probe).map_err(|e| e.to_string())?;
            let want = knn_naive(&refs, &probe, k);
            ensure(got == want, || format!("case {case}: knn {got} vs naive {want}"))?;
            probes += 1;
        }
    }
    Ok(format!("{probes} probes exact"))
}

/// Linear interpolation between order statistics of a sorted copy.
pub fn quantiles_by_sorting(values: &[f64], divisor: usize) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let q = n.div_ceil(divisor);
    let probs: Vec<f64> = if q == 1 { vec![0.5] } else { (0..q).map(|k| k as f64 / (q - 1) as f64).collect() };
    probs
        .into_iter()
        .map(|p| {
            let h = p * (n - 1) as f64;
            let lo = h.floor() as usize;
            if lo + 1 >= n {
                s[n - 1]
            } else {
                s[lo] * (1.0 - (h - lo as f64)) + s[lo + 1] * (h - lo as f64)
            }
        })
        .collect()
}

pub fn quant_oracle(x: &Series, cfg: &QuantConfig) -> Vec<f64> {
    let diff = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[1] - w[0]).collect() };
    let raw: Vec<Vec<f64>> = (0..x.n_channels()).map(|c| x.channel(c).to_vec()).collect();
    let d1: Vec<Vec<f64>> = raw.iter().map(|v| diff(v)).collect();
    let d2: Vec<Vec<f64>> = d1.iter().map(|v| diff(v)).collect();
    let mut out = Vec::new();
    for rep in [raw, d1, d2] {
        for (a, b) in quant_intervals(rep[0].len(), cfg.depth) {
            for ch in &rep {
                out.extend(quantiles_by_sorting(&ch[a..b], cfg.divisor));
            }
        }
    }
    out
}

pub fn check_quant(cases: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let mut values = 0;
    for case in 0..cases {
        let cfg = QuantConfig {
            depth: rng.random_range(1..=6),
            divisor: rng.random_range(1..=6),
        };
        let len = rng.random_range(cfg.min_len()..=80);
        let m = rng.random_range(1..=3);
        let x = random_series(&mut rng, len, m);
        let got = quant_features(&x, &cfg).map_err(|e| e.to_string())?;
        let want = quant_oracle(&x, &cfg);
        ensure(got.len() == want.len(), || format!("case {case}: {} features vs {}", got.len(), want.len()))?;
        let worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst <= 1e-12, || format!("case {case}: max deviation {worst:e}"))?;
        values += got.len();
    }
    Ok(format!("{values} quantiles within 1e-12"))
}

pub fn check_logistic_gradient(cases: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (n, f, k) = (rng.random_range(5..30), rng.random_range(1..6), rng.random_range(2..5));
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let obj = LogisticObjective {
            rows: &rows,
            labels: &labels,
            n_classes: k,
            l2: rng.random_range(0.0..0.5),
        };
        let params: Vec<f64> = (0..obj.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = obj.loss_and_grad(&params);
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (obj.loss(&up) - obj.loss(&down)) / (2.0 * h);
            let err = (fd - grad[j]).abs() / grad[j].abs().max(1.0);
            worst = worst.max(err);
            ensure(err <= 1e-5, || format!("case {case} param {j}: grad {} vs fd {fd}", grad[j]))?;
        }
    }
    Ok(format!("max relative error {worst:.1e}"))
}

// ---- criterion 2 ----------------------------------------------------------

pub fn default_filter() -> Butterworth {
    let cfg = PreprocessConfig::default();
    Butterworth::lowpass(cfg.filter_order, cfg.cutoff_hz, cfg.fs_hz).unwrap()
}

/// Amplitude of the `freq` component over the middle 600 samples of a
/// filtered 1000-sample unit sine.
pub fn filtered_tone_amplitude(freq: f64) -> f64 {
    let w = |i: usize| 2.0 * std::f64::consts::PI * freq * i as f64 / 50.0;
    let x: Vec<f64> = (0..1000).map(|i| w(i).sin()).collect();
    let y = default_filter().filtfilt(&x).unwrap();
    let (s, c) = (200..800).fold((0.0, 0.0), |(s, c), i| (s + y[i] * w(i).sin(), c + y[i] * w(i).cos()));
    2.0 * f64::hypot(s, c) / 600.0
}

pub fn check_signal(seed: u64) -> Check {
    let f = default_filter();
    let mut dc_worst: f64 = 0.0;
    for level in [-9.81, 0.0, 1e-3, 3.7, 52.0] {
        let y = f.filtfilt(&vec![level; 500]).unwrap();
        for v in y {
            dc_worst = dc_worst.max(if level == 0.0 { v.abs() } else { (v / level - 1.0).abs() });
        }
    }
    ensure(dc_worst <= 1e-9, || format!("dc gain off by {dc_worst:e}"))?;
    let tone = filtered_tone_amplitude(24.0);
    ensure(tone < 0.01, || format!("24 Hz tone keeps {tone} of its amplitude"))?;

    let mut rng = rng_from_seed(seed);
    let mut lin_worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(f.min_len()..400);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (f.filtfilt(&x).unwrap(), f.filtfilt(&y).unwrap(), f.filtfilt(&mix).unwrap());
        for i in 0..n {
            lin_worst = lin_worst.max((fm[i] - (a * fx[i] + b * fy[i])).abs());
        }
    }
    ensure(lin_worst <= 1e-9, || format!("linearity off by {lin_worst:e}"))?;

    let corpus = gen_corpus(3, 2, AttackCounts::none(), seed).unwrap();
    let mut mag_worst: f64 = 0.0;
    for t in &corpus.traces {
        let mag: Vec<[f64; 3]> = t.samples.iter().map(|r| [r[6], r[7], r[8]]).collect();
        let base = debias_magnetometer(&mag);
        for _ in 0..5 {
            let off = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)];
            let moved: Vec<[f64; 3]> = mag.iter().map(|v| [v[0] + off[0], v[1] + off[1], v[2] + off[2]]).collect();
            for (p, q) in debias_magnetometer(&moved).iter().zip(&base) {
                for a in 0..3 {
                    mag_worst = mag_worst.max((p[a] - q[a]).abs());
                }
            }
        }
    }
    ensure(mag_worst <= 1e-12, || format!("magnetometer offset changes output by {mag_worst:e}"))?;
    Ok(format!(
        "dc {dc_worst:.1e}, 24 Hz {:.2}%, linearity {lin_worst:.1e}, mag offset {mag_worst:.1e}",
        tone * 100.0
    ))
}

// ---- criterion 3 ----------------------------------------------------------

pub fn spoof_pipeline() -> Pipeline {
    Pipeline {
        window: WindowSpec::new(10, 50, 100, Representation::Single).unwrap(),
        ..Pipeline::default()
    }
}

pub fn check_leakage(resamples: usize, seed: u64) -> Check {
    let corpus = gen_corpus(12, 4, AttackCounts::default(), seed).unwrap();
    let (samples, _) = spoof_pipeline().prepare(&corpus.traces).map_err(|e| e.to_string())?;
    let mut cfg = SpoofConfig::new(spoof_pipeline(), DetectorConfig::default_for(DetectorKind::KnnEuclid), seed);
    cfg.resamples = resamples;
    let plans = plan_spoof(&samples, &cfg).map_err(|e| e.to_string())?;
    ensure(plans.len() == resamples, || format!("{} plans", plans.len()))?;
    let mut distinct = std::collections::BTreeSet::new();
    for plan in &plans {
        ensure(plan.train.iter().all(|p| !plan.test.contains(p)), || {
            format!("resample {}: participant on both sides", plan.index)
        })?;
        let idx = spoof_training_indices(&samples, plan).map_err(|e| e.to_string())?;
        for &i in &idx {
            let s = &samples[i];
            ensure(s.label == Label::Bonafide, || format!("resample {}: attack {} in training", plan.index, s.trace_id))?;
            ensure(plan.train.contains(&s.participant_id.unwrap()), || {
                format!("resample {}: {} from a test participant", plan.index, s.trace_id)
            })?;
        }
        let mut held: Vec<u32> = plan.inner.concat();
        held.sort_unstable();
        ensure(held == plan.train, || format!("resample {}: inner folds do not partition training", plan.index))?;
        distinct.insert(plan.test.clone());
        // A test participant slipped into training must be caught.
        let mut bad = plan.clone();
        bad.train.push(plan.test[0]);
        bad.train.sort_unstable();
        ensure(
            matches!(spoof_training_indices(&samples, &bad), Err(ProtocolError::Leakage(_))),
            || format!("resample {}: injected leak not detected", plan.index),
        )?;
    }
    Ok(format!("{resamples} resamples clean, {} distinct test sets", distinct.len()))
}

pub fn eval_args(corpus: &Path, out: &Path, task: &str, method: &str) -> Vec<String> {
    let mut args: Vec<String> = ["eval", "--corpus"].map(String::from).to_vec();
    args.push(corpus.display().to_string());
    args.extend(["--task", task, "--method", method, "--seed", "7", "--out"].map(String::from));
    args.push(out.display().to_string());
    match task {
        "spoof" => args.extend(["--window", "10,50,100"].map(String::from)),
        "oneclass" => args.extend(["--window", "10,50,150", "--channels", "cross_x", "--enroll", "6"].map(String::from)),
        _ => args.extend(
            ["--window", "10,50,100", "--repr", "double", "--channels", "acc_xyz", "--folds", "3", "--repeats", "2"]
                .map(String::from),
        ),
    }
    args
}

pub fn run_eval(jobs: Option<usize>, args: &[String], dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut cmd = bin();
    if let Some(j) = jobs {
        cmd.args(["--jobs", &j.to_string()]);
    }
    let out = cmd.args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("eval failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    motiongate::cli::REPORT_FILES
        .iter()
        .map(|f| {
            std::fs::read(dir.join(f))
                .map(|b| (f.to_string(), b))
                .map_err(|e| e.to_string())
        })
        .collect()
}

pub fn check_determinism() -> Check {
    let (corpus, _) = synth_dir(8, 8, AttackCounts { stationary: 2, handheld: 3, temporal_shift: 3 }, 11);
    let scratch = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for (task, method) in [("spoof", "knn_quant"), ("oneclass", "iforest_raw"), ("verify", "kernel_logit")] {
        let path = |name: &str| scratch.path().join(format!("{task}-{name}"));
        let a = run_eval(None, &eval_args(corpus.path(), &path("a"), task, method), &path("a"))?;
        let b = run_eval(None, &eval_args(corpus.path(), &path("b"), task, method), &path("b"))?;
        let serial = run_eval(Some(1), &eval_args(corpus.path(), &path("serial"), task, method), &path("serial"))?;
        let parallel = run_eval(Some(8), &eval_args(corpus.path(), &path("parallel"), task, method), &path("parallel"))?;
        for (name, bytes) in &a {
            ensure(&b[name] == bytes, || format!("{task}: {name} differs between reruns"))?;
            ensure(serial[name] == parallel[name], || format!("{task}: {name} differs between --jobs 1 and --jobs 8"))?;
            ensure(&serial[name] == bytes, || format!("{task}: {name} depends on the worker count"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} report files byte-identical across reruns and --jobs 1/8"))
}

// ---- criterion 4 ----------------------------------------------------------

/// Acc channels of the whole conditioned trace: no event anchoring at all.
pub fn unanchored(trace: &MotionTrace) -> Series {
    let c = condition_trace(trace, &PreprocessConfig::default()).unwrap();
    Series::from_channels((0..3).map(|i| c.channel(i).to_vec()).collect())
}

pub fn check_synthetic_pipeline(kinds: &[DetectorKind]) -> Check {
    let corpus = gen_corpus(30, 12, AttackCounts::default(), 7).map_err(|e| e.to_string())?;
    let pipe = spoof_pipeline();
    let (samples, excluded) = pipe.prepare(&corpus.traces).map_err(|e| e.to_string())?;
    ensure(excluded.is_empty(), || format!("{} traces excluded", excluded.len()))?;
    let mut lines = Vec::new();
    for &kind in kinds {
        let cfg = SpoofConfig::new(pipe.clone(), DetectorConfig::default_for(kind), 7);
        let report = spoof_on_samples(&samples, Vec::new(), &cfg).map_err(|e| e.to_string())?;
        let worst = report
            .units
            .iter()
            .map(|u| u.far_by_type_pct["stationary"])
            .fold(0.0, f64::max);
        ensure(worst == 0.0, || format!("{kind}: stationary FAR up to {worst}%"))?;
        lines.push(format!("{kind} FAR {:.1}%", report.summary.far_pct.mean));
    }

    // Anchoring sensitivity: the shifted copies only differ in capture_ms.
    let refs: Vec<Series> = corpus.traces.iter().filter(|t| t.is_bonafide()).take(36).map(unanchored).collect();
    let shifted: Vec<&MotionTrace> =
        corpus.traces.iter().filter(|t| t.attack_type == AttackType::TemporalShift).collect();
    ensure(shifted.len() == corpus.twins.len(), || "twin count mismatch".into())?;
    for &kind in kinds {
        let cfg = match DetectorConfig::default_for(kind) {
            // Whole traces are long; a coarser band keeps this quick.
            DetectorConfig::KnnDtw { k, .. } => DetectorConfig::KnnDtw { k, band: Some(0.1) },
            other => other,
        };
        let det = cfg.fit(&refs, 3).map_err(|e| e.to_string())?;
        for s in &shifted {
            let twin = &corpus.twins[&s.trace_id];
            ensure(s.samples == twin.samples && s.capture_ms != twin.capture_ms, || {
                format!("{} is not a shifted copy of its twin", s.trace_id)
            })?;
            let (a, b) = (det.score(&unanchored(s)).unwrap(), det.score(&unanchored(twin)).unwrap());
            ensure(a.to_bits() == b.to_bits(), || format!("{kind}: {} scores {a} vs twin {b}", s.trace_id))?;
        }
    }
    let anchored = |t: &MotionTrace| {
        motiongate::preprocess::window_trace(t, &pipe.preprocess, &pipe.window, &pipe.selector).map(|w| w.values)
    };
    let moved = shifted
        .iter()
        .filter(|s| match (anchored(s), anchored(&corpus.twins[&s.trace_id])) {
            (Ok(a), Ok(b)) => a != b,
            _ => true,
        })
        .count();
    ensure(moved == shifted.len(), || format!("only {moved} of {} capture windows moved", shifted.len()))?;
    Ok(format!(
        "stationary FAR 0 in every resample ({}); {} shifted proxies score identically to twins unanchored",
        lines.join(", "),
        shifted.len()
    ))
}

// ---- criterion 6 ----------------------------------------------------------

pub struct ModelFixture {
    pub dir: tempfile::TempDir,
    pub corpus: SynthCorpus,
    /// (model id, classifier classes if it needs a claim)
    pub models: Vec<(String, Option<Vec<u32>>)>,
}

/// Trains a small spoof, one-class and verification model into a temp dir.
pub fn model_fixture(seed: u64) -> ModelFixture {
    let corpus = gen_corpus(6, 8, AttackCounts { stationary: 3, handheld: 3, temporal_shift: 4 }, seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spoof = spoof_pipeline();
    let (samples, _) = spoof.prepare(&corpus.traces).unwrap();
    let quick_rockad = DetectorConfig::Rockad { n_estimators: 4, n_kernels: 64, k: 3 };
    let (m, t) = artifact::train_spoof_model(&samples, &quick_rockad, 3, 99.0, seed).unwrap();
    ModelArtifact::new("spoof-rockad", &spoof, t, FittedModel::Detector(m))
        .unwrap()
        .save(&dir.path().join("spoof-rockad.json"))
        .unwrap();
    let (m, t) = artifact::train_spoof_model(&samples, &DetectorConfig::KnnEuclid { k: 3 }, 3, 99.0, seed).unwrap();
    ModelArtifact::new("spoof-knn", &spoof, t, FittedModel::Detector(m))
        .unwrap()
        .save(&dir.path().join("spoof-knn.json"))
        .unwrap();

    let one = Pipeline {
        window: WindowSpec::new(10, 50, 150, Representation::Single).unwrap(),
        selector: "cross_x".parse::<ChannelSelector>().unwrap(),
        ..Pipeline::default()
    };
    let (samples, _) = one.prepare(&corpus.traces).unwrap();
    let (m, t) = artifact::train_oneclass_model(&samples, &DetectorConfig::KnnEuclid { k: 3 }, 2, 6, 2, 2, 99.0, seed)
        .unwrap();
    ModelArtifact::new("user2-knn", &one, t, FittedModel::Detector(m))
        .unwrap()
        .save(&dir.path().join("user2-knn.json"))
        .unwrap();

    let verify = Pipeline {
        window: WindowSpec::new(10, 50, 100, Representation::Double).unwrap(),
        ..Pipeline::default()
    };
    let (samples, _) = verify.prepare(&corpus.traces).unwrap();
    let clf = ClassifierConfig::QuantEt {
        n_trees: 30,
        max_features: 0.1,
        quant: QuantConfig::default(),
    };
    let (m, t) = artifact::train_verify_model(&samples, &clf, 3, 1.0, seed).unwrap();
    let classes = m.classes().to_vec();
    ModelArtifact::new("verify-quant", &verify, t, FittedModel::Classifier(m))
        .unwrap()
        .save(&dir.path().join("verify-quant.json"))
        .unwrap();

    ModelFixture {
        dir,
        corpus,
        models: vec![
            ("spoof-rockad".into(), None),
            ("spoof-knn".into(), None),
            ("user2-knn".into(), None),
            ("verify-quant".into(), Some(classes)),
        ],
    }
}

/// Writes `trace` as CSV plus sidecar and returns the CSV path.
pub fn write_trace(dir: &Path, name: &str, trace: &MotionTrace) -> PathBuf {
    let csv = dir.join(format!("{name}.csv"));
    std::fs::write(&csv, serialize_csv(trace)).unwrap();
    std::fs::write(dir.join(format!("{name}.json")), serialize_meta(trace)).unwrap();
    csv
}

pub fn request_body(model_id: &str, trace: &MotionTrace, claim: Option<u32>, style: u8) -> String {
    let payload = match style {
        0 => serde_json::json!({ "csv": serialize_csv(trace), "meta": serde_json::from_str::<serde_json::Value>(&serialize_meta(trace)).unwrap() }),
        1 => serde_json::json!({ "csv": serialize_csv(trace), "meta": serialize_meta(trace) }),
        _ => serde_json::json!({
            "timestamps_ms": trace.timestamps_ms,
            "samples": trace.samples.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
            "camera_open_ms": trace.camera_open_ms,
            "capture_ms": trace.capture_ms,
        }),
    };
    let mut body = serde_json::json!({ "model_id": model_id, "trace": payload });
    if let Some(c) = claim {
        body["claimed_id"] = c.into();
    }
    body.to_string()
}

pub struct Server {
    pub base: String,
}

pub fn start_server(models_dir: &Path) -> Server {
    let models = artifact::load_model_dir(models_dir).unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        rt.block_on(motiongate::server::serve(listener, models)).unwrap();
    });
    Server {
        base: format!("http://{addr}"),
    }
}

pub fn check_service(requests: usize, seed: u64) -> Check {
    let fx = model_fixture(seed);
    let server = start_server(fx.dir.path());
    let client = reqwest::blocking::Client::new();
    let traces_dir = tempfile::tempdir().unwrap();
    let traces: Vec<(PathBuf, &MotionTrace)> = fx
        .corpus
        .traces
        .iter()
        .enumerate()
        .map(|(i, t)| (write_trace(traces_dir.path(), &format!("t{i}"), t), t))
        .collect();
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let (mut ok, mut rejects, mut errored_both) = (0, 0, 0);
    for r in 0..requests {
        let (model_id, classes) = &fx.models[rng.random_range(0..fx.models.len())];
        let (csv, trace) = &traces[rng.random_range(0..traces.len())];
        let claim = classes.as_ref().map(|c| c[rng.random_range(0..c.len())]);
        let resp = client
            .post(format!("{}/v1/score", server.base))
            .body(request_body(model_id, trace, claim, rng.random_range(0..3)))
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        let local = cmd_score(&ScoreArgs {
            model: fx.dir.path().join(format!("{model_id}.json")),
            trace: csv.clone(),
            meta: None,
            claim,
        });
        match local {
            Ok(out) => {
                ensure(status == 200, || format!("request {r}: status {status} but cmd_score succeeded: {body}"))?;
                let served = body["score"].as_f64().unwrap();
                ensure(served.to_bits() == out.score.to_bits(), || {
                    format!("request {r}: served {served} vs cmd_score {}", out.score)
                })?;
                ensure(body["decision"] == out.decision.as_str(), || format!("request {r}: decision differs"))?;
                ok += 1;
                rejects += usize::from(out.decision == Decision::Reject);
            }
            Err(e) => {
                ensure(status >= 400, || format!("request {r}: served 200 but cmd_score failed: {e}"))?;
                errored_both += 1;
            }
        }
    }
    ensure(ok * 2 > requests, || format!("only {ok} of {requests} requests scored"))?;

    let status_of = |body: String| client.post(format!("{}/v1/score", server.base)).body(body).send().unwrap().status().as_u16();
    let good = &fx.corpus.traces[0];
    ensure(status_of("{not json".into()) == 400, || "malformed json not 400".into())?;
    let mut broken = good.clone();
    broken.timestamps_ms.reverse();
    ensure(status_of(request_body("spoof-knn", &broken, None, 2)) == 400, || "bad trace not 400".into())?;
    ensure(status_of(request_body("verify-quant", good, None, 0)) == 400, || "missing claim not 400".into())?;
    ensure(status_of(request_body("verify-quant", good, Some(999), 0)) == 400, || "unknown claim not 400".into())?;
    ensure(status_of(request_body("nope", good, None, 0)) == 404, || "unknown model not 404".into())?;
    let mut late = good.clone();
    late.capture_ms = *late.timestamps_ms.last().unwrap() - 100;
    ensure(status_of(request_body("spoof-knn", &late, None, 0)) == 422, || "out-of-range window not 422".into())?;
    Ok(format!(
        "{ok} scores bit-identical to cmd_score ({rejects} rejects), {errored_both} errored in both; 400/404/422 exercised"
    ))
}
