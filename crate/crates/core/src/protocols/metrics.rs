//! Threshold calibration and biometric error rates.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Which side of the threshold a model rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Anomaly scores: reject when `score > threshold`.
    RejectAbove,
    /// Verification scores: reject when `score < threshold`.
    RejectBelow,
}

impl Direction {
    /// Rejection is strict on both sides, so a score equal to the threshold
    /// is accepted. Non-finite scores are always rejected.
    pub fn rejects(self, score: f64, threshold: f64) -> bool {
        if !score.is_finite() {
            return true;
        }
        match self {
            Direction::RejectAbove => score > threshold,
            Direction::RejectBelow => score < threshold,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::RejectAbove => "reject_above",
            Direction::RejectBelow => "reject_below",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub percentile: f64,
    pub n_scores: usize,
    pub folds: usize,
    pub repeats: usize,
    /// All calibration scores were equal.
    pub degenerate: bool,
    /// Too few scores; the threshold fell back to the max (reject-above) or
    /// min (reject-below) score.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub direction: Direction,
    pub meta: CalibrationMeta,
}

impl Threshold {
    /// An uncalibrated threshold; `meta.n_scores == 0` marks it.
    pub fn fixed(value: f64, direction: Direction) -> Self {
        Self {
            value,
            direction,
            meta: CalibrationMeta {
                percentile: 0.0,
                n_scores: 0,
                folds: 0,
                repeats: 0,
                degenerate: false,
                fallback: false,
            },
        }
    }

    pub fn decide(&self, score: f64) -> Decision {
        if self.direction.rejects(score, self.value) {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

/// Fewer calibration scores than this triggers the max/min fallback.
pub const MIN_CALIBRATION_SCORES: usize = 10;

/// Linear-interpolated percentile of `sorted` (ascending, non-empty),
/// `q` in `[0, 100]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn calibrate_threshold(
    scores: &[f64],
    percentile: f64,
    direction: Direction,
) -> Result<Threshold, ProtocolError> {
    if scores.is_empty() {
        return Err(ProtocolError::EmptyScores("calibration"));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(ProtocolError::InvalidConfig(format!(
            "percentile {percentile} outside [0, 100]"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(ProtocolError::NonFiniteScore(*bad));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let degenerate = sorted[0] == sorted[sorted.len() - 1];
    let fallback = sorted.len() < MIN_CALIBRATION_SCORES;
    let value = if fallback {
        log::warn!(
            "only {} calibration scores (< {MIN_CALIBRATION_SCORES}); using the {} score",
            sorted.len(),
            if direction == Direction::RejectAbove { "maximum" } else { "minimum" }
        );
        match direction {
            Direction::RejectAbove => sorted[sorted.len() - 1],
            Direction::RejectBelow => sorted[0],
        }
    } else {
        percentile_sorted(&sorted, percentile)
    };
    if degenerate {
        log::warn!("all {} calibration scores equal {value}", sorted.len());
    }
    Ok(Threshold {
        value,
        direction,
        meta: CalibrationMeta {
            percentile,
            n_scores: sorted.len(),
            folds: 0,
            repeats: 0,
            degenerate,
            fallback,
        },
    })
}

/// Fraction of `scores` rejected at `threshold`.
pub fn reject_rate(scores: &[f64], threshold: &Threshold) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| threshold.decide(s) == Decision::Reject).count() as f64 / scores.len() as f64
}

/// Fraction of `scores` accepted at `threshold`.
pub fn accept_rate(scores: &[f64], threshold: &Threshold) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    1.0 - reject_rate(scores, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    /// Fraction in `[0, 1]`.
    pub eer: f64,
    pub threshold: f64,
    pub frr: f64,
    pub far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub frr: f64,
    pub far: f64,
}

fn sorted_distinct(genuine: &[f64], impostor: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Counts of values `< t` in a sorted slice.
fn count_below(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&v| v < t)
}

/// Equal error rate for verification scores (higher = more genuine).
/// Candidates are every distinct score and every midpoint between
/// neighbouring distinct scores; `FRR(t)` counts genuine `< t`, `FAR(t)`
/// counts impostor `>= t`. Ties in `|FRR - FAR|` go to the lower threshold.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<EerPoint, ProtocolError> {
    if genuine.is_empty() {
        return Err(ProtocolError::EmptyScores("genuine"));
    }
    if impostor.is_empty() {
        return Err(ProtocolError::EmptyScores("impostor"));
    }
    if let Some(bad) = genuine.iter().chain(impostor).find(|s| s.is_nan()) {
        return Err(ProtocolError::NonFiniteScore(*bad));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let (ng, ni) = (g.len() as f64, im.len() as f64);
    let distinct = sorted_distinct(&g, &im);
    let mut best: Option<EerPoint> = None;
    let mut consider = |t: f64| {
        let frr = count_below(&g, t) as f64 / ng;
        let far = (im.len() - count_below(&im, t)) as f64 / ni;
        let gap = (frr - far).abs();
        let better = match best {
            None => true,
            Some(b) => gap < (b.frr - b.far).abs() || (gap == (b.frr - b.far).abs() && t < b.threshold),
        };
        if better {
            best = Some(EerPoint {
                eer: (frr + far) / 2.0,
                threshold: t,
                frr,
                far,
            });
        }
    };
    for (i, &t) in distinct.iter().enumerate() {
        consider(t);
        if let Some(&next) = distinct.get(i + 1) {
            consider(t + (next - t) / 2.0);
        }
    }
    Ok(best.unwrap())
}

/// FRR/FAR at every distinct score for plotting, in the given direction.
pub fn rate_curve(genuine: &[f64], impostor: &[f64], direction: Direction) -> Vec<CurvePoint> {
    sorted_distinct(genuine, impostor)
        .into_iter()
        .map(|t| {
            let th = Threshold::fixed(t, direction);
            CurvePoint {
                threshold: t,
                frr: reject_rate(genuine, &th),
                far: accept_rate(impostor, &th),
            }
        })
        .collect()
}
