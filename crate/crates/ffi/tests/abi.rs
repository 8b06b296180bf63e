use std::ffi::{CStr, CString};
use std::ptr;

use motiongate::artifact::{self, FittedModel, ModelArtifact};
use motiongate::classifiers::{ClassifierConfig, FittedClassifier};
use motiongate::detectors::DetectorConfig;
use motiongate::preprocess::{Representation, WindowSpec};
use motiongate::protocols::{Decision, Pipeline};
use motiongate::synthgen::{gen_corpus, AttackCounts, SynthCorpus};
use motiongate::trace::{serialize_csv, serialize_meta, MotionTrace};
use motiongate_ffi::*;

struct Fixture {
    corpus: SynthCorpus,
    spoof: ModelArtifact,
    verify: ModelArtifact,
    classes: Vec<u32>,
}

fn fixture() -> Fixture {
    let corpus = gen_corpus(4, 6, AttackCounts { stationary: 2, handheld: 2, temporal_shift: 2 }, 5).unwrap();
    let pipe = Pipeline {
        window: WindowSpec::new(10, 50, 100, Representation::Single).unwrap(),
        ..Pipeline::default()
    };
    let (samples, _) = pipe.prepare(&corpus.traces).unwrap();
    let (m, t) = artifact::train_spoof_model(&samples, &DetectorConfig::KnnEuclid { k: 3 }, 3, 99.0, 5).unwrap();
    let spoof = ModelArtifact::new("spoof", &pipe, t, FittedModel::Detector(m)).unwrap();
    let clf = ClassifierConfig::default_for(motiongate::classifiers::ClassifierKind::KernelLogit);
    let (m, t): (FittedClassifier, _) = artifact::train_verify_model(&samples, &clf, 2, 1.0, 5).unwrap();
    let classes = m.classes().to_vec();
    let verify = ModelArtifact::new("verify", &pipe, t, FittedModel::Classifier(m)).unwrap();
    Fixture { corpus, spoof, verify, classes }
}

fn model(a: &ModelArtifact) -> *mut MgModel {
    let json = a.to_json();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mg_model_from_json(json.as_ptr(), json.len(), &mut out) }, MgStatus::Ok);
    out
}

fn trace(t: &MotionTrace) -> *mut MgTrace {
    let (csv, meta) = (serialize_csv(t), serialize_meta(t));
    let mut out = ptr::null_mut();
    let s = unsafe { mg_trace_parse(csv.as_ptr(), csv.len(), meta.as_ptr(), meta.len(), &mut out) };
    assert_eq!(s, MgStatus::Ok, "{}", last_error());
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mg_last_error_message()) }.to_string_lossy().into_owned()
}

fn blank() -> MgScore {
    MgScore { score: f64::NAN, threshold: f64::NAN, decision: MgDecision::Accept, direction: MgDirection::RejectAbove }
}

#[test]
fn scores_match_the_library() {
    let fx = fixture();
    let spoof = model(&fx.spoof);
    let verify = model(&fx.verify);
    let mut rejects = 0;
    for (i, t) in fx.corpus.traces.iter().enumerate() {
        let h = trace(t);
        let mut got = blank();
        assert_eq!(unsafe { mg_score(spoof, h, -1, &mut got) }, MgStatus::Ok);
        let want = fx.spoof.score_trace(t, None).unwrap();
        assert_eq!(got.score.to_bits(), want.score.to_bits());
        assert_eq!(got.threshold.to_bits(), want.threshold.to_bits());
        assert_eq!(got.direction, MgDirection::RejectAbove);
        assert_eq!(got.decision == MgDecision::Reject, want.decision == Decision::Reject);
        rejects += usize::from(got.decision == MgDecision::Reject);

        let claim = fx.classes[i % fx.classes.len()];
        assert_eq!(unsafe { mg_score(verify, h, claim as i64, &mut got) }, MgStatus::Ok);
        let want = fx.verify.score_trace(t, Some(claim)).unwrap();
        assert_eq!(got.score.to_bits(), want.score.to_bits());
        assert_eq!(got.direction, MgDirection::RejectBelow);
        unsafe { mg_trace_free(h) };
    }
    assert!(rejects > 0);
    unsafe {
        mg_model_free(spoof);
        mg_model_free(verify);
    }
}

#[test]
fn loads_from_a_file() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spoof.json");
    fx.spoof.save(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mg_model_load(c.as_ptr(), &mut m) }, MgStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { mg_model_free(m) };

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mg_model_load(missing.as_ptr(), &mut m) }, MgStatus::Io);
    assert!(last_error().contains("nope.json"));
}

#[test]
fn null_pointers_are_reported() {
    let mut m = ptr::null_mut();
    let mut t = ptr::null_mut();
    let mut s = blank();
    unsafe {
        assert_eq!(mg_model_load(ptr::null(), &mut m), MgStatus::NullPointer);
        assert_eq!(last_error(), "path is null");
        assert_eq!(mg_model_from_json(ptr::null(), 0, &mut m), MgStatus::NullPointer);
        assert_eq!(mg_model_from_json(b"{}".as_ptr(), 2, ptr::null_mut()), MgStatus::NullPointer);
        assert_eq!(mg_trace_parse(ptr::null(), 0, b"{}".as_ptr(), 2, &mut t), MgStatus::NullPointer);
        assert_eq!(mg_score(ptr::null(), ptr::null(), -1, &mut s), MgStatus::NullPointer);
        assert_eq!(last_error(), "model is null");
        mg_model_free(ptr::null_mut());
        mg_trace_free(ptr::null_mut());
    }
    assert!(m.is_null() && t.is_null());
}

#[test]
fn invalid_utf8_path() {
    let path = [0x66u8, 0xff, 0x00];
    let mut m = ptr::null_mut();
    let s = unsafe { mg_model_load(path.as_ptr().cast(), &mut m) };
    assert_eq!(s, MgStatus::InvalidUtf8);
}

#[test]
fn parse_and_version_errors() {
    let fx = fixture();
    let mut m = ptr::null_mut();
    let junk = b"not json";
    assert_eq!(unsafe { mg_model_from_json(junk.as_ptr(), junk.len(), &mut m) }, MgStatus::Parse);

    let mut v: serde_json::Value = serde_json::from_str(&fx.spoof.to_json()).unwrap();
    v["version"] = (v["version"].as_u64().unwrap() + 1).into();
    let future = v.to_string();
    assert_eq!(unsafe { mg_model_from_json(future.as_ptr(), future.len(), &mut m) }, MgStatus::Version);
    assert!(m.is_null());

    let mut t = ptr::null_mut();
    let mut bad = fx.corpus.traces[0].clone();
    bad.timestamps_ms.reverse();
    let (csv, meta) = (serialize_csv(&bad), serialize_meta(&bad));
    let s = unsafe { mg_trace_parse(csv.as_ptr(), csv.len(), meta.as_ptr(), meta.len(), &mut t) };
    assert_eq!(s, MgStatus::Parse);
    assert!(!last_error().is_empty());
}

#[test]
fn scoring_errors() {
    let fx = fixture();
    let verify = model(&fx.verify);
    let spoof = model(&fx.spoof);
    let good = trace(&fx.corpus.traces[0]);
    let mut s = blank();
    unsafe {
        assert_eq!(mg_score(verify, good, -1, &mut s), MgStatus::UnknownClaim);
        assert_eq!(mg_score(verify, good, 999, &mut s), MgStatus::UnknownClaim);
        assert_eq!(mg_score(verify, good, -7, &mut s), MgStatus::UnknownClaim);
    }
    let mut late = fx.corpus.traces[0].clone();
    late.capture_ms = *late.timestamps_ms.last().unwrap() - 100;
    let late = trace(&late);
    assert_eq!(unsafe { mg_score(spoof, late, -1, &mut s) }, MgStatus::WindowOutOfRange);
    assert!(s.score.is_nan());
    unsafe {
        mg_trace_free(good);
        mg_trace_free(late);
        mg_model_free(verify);
        mg_model_free(spoof);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/motiongate.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert_eq!(exports.len(), 8);
    for f in exports {
        let declared = header.contains(&format!(" {f}(")) || header.contains(&format!("*{f}("));
        assert!(declared, "{f} missing from header");
    }
    for ty in ["MgStatus", "MgDecision", "MgDirection", "MgScore", "MgModel", "MgTrace"] {
        assert!(header.contains(&format!("typedef struct {ty}")) || header.contains(&format!("typedef enum {ty}")));
    }
}
