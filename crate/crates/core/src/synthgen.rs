//! Deterministic synthetic selfie-capture traces and attack proxies.
//!
//! Device orientation is a pitch/roll/heading trajectory; gravity, raw
//! acceleration, gyroscope and magnetometer channels are all derived from it,
//! so the channels stay mutually consistent. Bona fide traces follow the
//! capture signature: tilt up before capture, hold still for about a second,
//! tilt back with a negative gyro-x burst, then looser handling.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_path, rng_from_seed, Rng};
use crate::trace::{write_corpus, AttackType, Label, MotionTrace, TraceError, GRID_MS, N_CHANNELS};

pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_DURATION_S: f64 = 10.0;
/// Lever arm between wrist pivot and sensor, metres.
const LEVER_M: f64 = 0.12;
/// Step for numeric derivatives of the orientation trajectory, seconds.
const DERIV_H: f64 = 1e-3;
const STATIONARY_NOISE: f64 = 0.005;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible timing: {0}")]
    Timing(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Per-participant motion habits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub participant_id: Option<u32>,
    /// Pitch while holding the phone before the capture ramp.
    pub base_tilt_deg: f64,
    pub tilt_up_deg: f64,
    pub ramp_s: f64,
    /// Gap between the end of the ramp and the capture.
    pub lead_s: f64,
    pub hold_s: f64,
    /// Pitch reached after tilting back, relative to `base_tilt_deg`.
    pub tilt_back_offset_deg: f64,
    pub tilt_back_s: f64,
    pub roll_deg: f64,
    pub heading_deg: f64,
    pub field_ut: f64,
    pub inclination_deg: f64,
    pub hard_iron_ut: [f64; 3],
    /// Slow orientation wander amplitude.
    pub wander_deg: f64,
    pub acc_noise: f64,
    pub gyr_noise: f64,
    pub mag_noise: f64,
    /// Per-trace variation of angles (deg) and durations (fraction).
    pub jitter_deg: f64,
    pub jitter_frac: f64,
}

impl MotionProfile {
    /// Draws a profile for one simulated participant.
    pub fn sample(participant_id: Option<u32>, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        Self {
            participant_id,
            base_tilt_deg: u(34.0, 46.0),
            tilt_up_deg: u(24.0, 32.0),
            ramp_s: u(0.6, 1.2),
            lead_s: u(0.15, 0.45),
            hold_s: u(0.8, 1.2),
            tilt_back_offset_deg: u(-8.0, 4.0),
            tilt_back_s: u(0.45, 0.9),
            roll_deg: u(-6.0, 6.0),
            heading_deg: u(0.0, 360.0),
            field_ut: u(42.0, 55.0),
            inclination_deg: u(55.0, 70.0),
            hard_iron_ut: [u(-20.0, 20.0), u(-20.0, 20.0), u(-20.0, 20.0)],
            wander_deg: u(0.8, 2.5),
            acc_noise: u(0.02, 0.06),
            gyr_noise: u(0.01, 0.03),
            mag_noise: u(0.2, 0.5),
            jitter_deg: 4.0,
            jitter_frac: 0.1,
        }
    }

    /// The same habits with every random component removed.
    pub fn zero_noise(&self) -> Self {
        Self {
            wander_deg: 0.0,
            acc_noise: 0.0,
            gyr_noise: 0.0,
            mag_noise: 0.0,
            jitter_deg: 0.0,
            jitter_frac: 0.0,
            ..self.clone()
        }
    }
}

/// Quintic smoothstep: zero first and second derivatives at both ends.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Sum of a few slow sinusoids.
#[derive(Debug, Clone)]
struct Wander {
    terms: Vec<(f64, f64, f64)>,
}

impl Wander {
    fn new(rng: &mut Rng, amplitude_rad: f64) -> Self {
        let terms = (0..3)
            .map(|_| {
                (
                    amplitude_rad / 3f64.sqrt() * rng.random_range(0.5..1.0),
                    rng.random_range(0.2..1.2),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self { terms }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum()
    }
}

/// Orientation in radians as a function of time in seconds.
trait Trajectory: Sync {
    fn pitch(&self, t: f64) -> f64;
    fn roll(&self, t: f64) -> f64;
    fn heading(&self, t: f64) -> f64;
    /// Multiplier on sensor noise at time `t`.
    fn noise_gain(&self, _t: f64) -> f64 {
        1.0
    }
}

struct CaptureTrajectory {
    base: f64,
    peak: f64,
    end: f64,
    ramp: (f64, f64),
    capture: f64,
    hold_end: f64,
    back_end: f64,
    roll: f64,
    heading: f64,
    wander: [Wander; 3],
}

impl CaptureTrajectory {
    /// Wander fades out just before the capture, stays off through the hold
    /// and fades back in afterwards.
    fn wander_gain(&self, t: f64) -> f64 {
        const FADE_OUT_S: f64 = 0.15;
        const FADE_IN_S: f64 = 0.3;
        if t < self.capture {
            1.0 - smoothstep((t - (self.capture - FADE_OUT_S)) / FADE_OUT_S)
        } else if t < self.hold_end {
            0.0
        } else {
            smoothstep((t - self.hold_end) / FADE_IN_S)
        }
    }
}

impl Trajectory for CaptureTrajectory {
    fn pitch(&self, t: f64) -> f64 {
        let (r0, r1) = self.ramp;
        let core = if t < r0 {
            self.base
        } else if t < r1 {
            self.base + (self.peak - self.base) * smoothstep((t - r0) / (r1 - r0))
        } else if t < self.hold_end {
            self.peak
        } else if t < self.back_end {
            self.peak + (self.end - self.peak) * smoothstep((t - self.hold_end) / (self.back_end - self.hold_end))
        } else {
            self.end
        };
        core + self.wander_gain(t) * self.wander[0].at(t)
    }

    fn roll(&self, t: f64) -> f64 {
        self.roll + self.wander_gain(t) * self.wander[1].at(t)
    }

    fn heading(&self, t: f64) -> f64 {
        self.heading + self.wander_gain(t) * self.wander[2].at(t)
    }

    fn noise_gain(&self, t: f64) -> f64 {
        if t < self.capture {
            1.0
        } else if t < self.hold_end {
            0.5
        } else {
            // Handling loosens after the tilt back.
            1.0 + 1.5 * smoothstep((t - self.back_end) / 2.0)
        }
    }
}

struct SteadyTrajectory {
    pitch: f64,
    roll: f64,
    heading: f64,
    wander: Option<[Wander; 3]>,
}

impl Trajectory for SteadyTrajectory {
    fn pitch(&self, t: f64) -> f64 {
        self.pitch + self.wander.as_ref().map_or(0.0, |w| w[0].at(t))
    }
    fn roll(&self, t: f64) -> f64 {
        self.roll + self.wander.as_ref().map_or(0.0, |w| w[1].at(t))
    }
    fn heading(&self, t: f64) -> f64 {
        self.heading + self.wander.as_ref().map_or(0.0, |w| w[2].at(t))
    }
}

/// Device-frame image of a world vector for pitch `p` (about x) and roll
/// `r` (about y).
fn to_device(v: [f64; 3], p: f64, r: f64) -> [f64; 3] {
    let (sp, cp) = p.sin_cos();
    let (sr, cr) = r.sin_cos();
    // Rx(p)
    let a = [v[0], cp * v[1] + sp * v[2], -sp * v[1] + cp * v[2]];
    // Ry(r)
    [cr * a[0] + sr * a[2], a[1], -sr * a[0] + cr * a[2]]
}

struct Sensors<'a> {
    profile: &'a MotionProfile,
    rng: Rng,
}

impl Sensors<'_> {
    fn gauss(&mut self, std: f64) -> f64 {
        if std == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, std).expect("finite std").sample(&mut self.rng)
    }

    /// Renders 15-channel rows at `times_s`.
    fn render(&mut self, traj: &dyn Trajectory, times_s: &[f64], noise_scale: f64) -> Vec<[f64; N_CHANNELS]> {
        let p = self.profile;
        let incl = p.inclination_deg.to_radians();
        let tremor_phase = self.rng.random_range(0.0..2.0 * PI);
        times_s
            .iter()
            .map(|&t| {
                let h = DERIV_H;
                let d1 = |f: &dyn Fn(f64) -> f64| (f(t + h) - f(t - h)) / (2.0 * h);
                let pitch = |x| traj.pitch(x);
                let roll = |x| traj.roll(x);
                let heading = |x| traj.heading(x);
                let (th, ph, ps) = (pitch(t), roll(t), heading(t));
                let dth = d1(&pitch);
                let ddth = (pitch(t + h) - 2.0 * th + pitch(t - h)) / (h * h);
                let gain = traj.noise_gain(t) * noise_scale;

                let up = to_device([0.0, 0.0, 1.0], th, ph);
                let grav = up.map(|v| GRAVITY * v);
                let tremor = (2.0 * PI * 9.0 * t + tremor_phase).sin() * p.acc_noise * gain;
                let lacc = [
                    self.gauss(p.acc_noise * gain),
                    LEVER_M * ddth + tremor + self.gauss(p.acc_noise * gain),
                    LEVER_M * dth * dth + self.gauss(p.acc_noise * gain),
                ];
                let acc = [grav[0] + lacc[0], grav[1] + lacc[1], grav[2] + lacc[2]];
                let gyr = [
                    dth + self.gauss(p.gyr_noise * gain),
                    d1(&roll) + self.gauss(p.gyr_noise * gain),
                    d1(&heading) + self.gauss(p.gyr_noise * gain),
                ];
                let world = [
                    p.field_ut * incl.cos() * ps.sin(),
                    p.field_ut * incl.cos() * ps.cos(),
                    -p.field_ut * incl.sin(),
                ];
                let m = to_device(world, th, ph);
                let mag = [
                    m[0] + p.hard_iron_ut[0] + self.gauss(p.mag_noise * noise_scale),
                    m[1] + p.hard_iron_ut[1] + self.gauss(p.mag_noise * noise_scale),
                    m[2] + p.hard_iron_ut[2] + self.gauss(p.mag_noise * noise_scale),
                ];
                [
                    acc[0], acc[1], acc[2], gyr[0], gyr[1], gyr[2], mag[0], mag[1], mag[2], lacc[0], lacc[1],
                    lacc[2], grav[0], grav[1], grav[2],
                ]
            })
            .collect()
    }
}

fn grid(duration_s: f64) -> Result<(Vec<i64>, Vec<f64>), SynthError> {
    let n = (duration_s * 1000.0 / GRID_MS as f64).round() as i64;
    if n < 1 {
        return Err(SynthError::Timing(format!("duration {duration_s} s gives no samples")));
    }
    let ms: Vec<i64> = (0..n).map(|i| i * GRID_MS).collect();
    let s = ms.iter().map(|&m| m as f64 / 1000.0).collect();
    Ok((ms, s))
}

fn jittered(rng: &mut Rng, value: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        value
    } else {
        value + rng.random_range(-spread..spread)
    }
}

/// One bona fide capture attempt.
pub fn gen_bonafide(
    profile: &MotionProfile,
    duration_s: f64,
    capture_at_s: f64,
    seed: u64,
) -> Result<MotionTrace, SynthError> {
    let mut rng = rng_from_seed(seed);
    let jf = profile.jitter_frac;
    let jd = profile.jitter_deg;
    let scale = |rng: &mut Rng, v: f64| v * jittered(rng, 1.0, jf);
    let ramp_s = scale(&mut rng, profile.ramp_s);
    let lead_s = scale(&mut rng, profile.lead_s);
    let hold_s = scale(&mut rng, profile.hold_s);
    let back_s = scale(&mut rng, profile.tilt_back_s);
    let base = jittered(&mut rng, profile.base_tilt_deg, jd);
    let peak = base + jittered(&mut rng, profile.tilt_up_deg, jd);
    let end = base + jittered(&mut rng, profile.tilt_back_offset_deg, jd);
    let roll = jittered(&mut rng, profile.roll_deg, jd);
    let heading = jittered(&mut rng, profile.heading_deg, 3.0 * jd);
    let camera_open_s: f64 = rng.random_range(0.5..1.0);

    let ramp_start = capture_at_s - lead_s - ramp_s;
    let back_end = capture_at_s + hold_s + back_s;
    if ramp_start < camera_open_s || back_end > duration_s || capture_at_s.is_nan() || capture_at_s >= duration_s {
        return Err(SynthError::Timing(format!(
            "capture at {capture_at_s} s needs [{ramp_start:.2}, {back_end:.2}] s inside [{camera_open_s:.2}, {duration_s}] s"
        )));
    }
    let wander_rad = profile.wander_deg.to_radians();
    let traj = CaptureTrajectory {
        base: base.to_radians(),
        peak: peak.to_radians(),
        end: end.to_radians(),
        ramp: (ramp_start, capture_at_s - lead_s),
        capture: capture_at_s,
        hold_end: capture_at_s + hold_s,
        back_end,
        roll: roll.to_radians(),
        heading: heading.to_radians(),
        wander: [
            Wander::new(&mut rng, wander_rad),
            Wander::new(&mut rng, wander_rad * 0.6),
            Wander::new(&mut rng, wander_rad * 0.8),
        ],
    };
    let (timestamps_ms, times) = grid(duration_s)?;
    let samples = Sensors {
        profile,
        rng: rng_from_seed(derive_path(seed, &[1])),
    }
    .render(&traj, &times, 1.0);
    Ok(MotionTrace {
        trace_id: String::new(),
        participant_id: profile.participant_id,
        samples,
        timestamps_ms,
        camera_open_ms: (camera_open_s * 1000.0).round() as i64,
        capture_ms: (capture_at_s * 1000.0).round() as i64,
        label: Label::Bonafide,
        attack_type: AttackType::None,
    })
}

/// Capture time used for corpus traces, drawn per trace.
fn draw_capture_s(rng: &mut Rng) -> f64 {
    rng.random_range(3.0..3.5)
}

fn steady_trace(
    profile: &MotionProfile,
    traj: &SteadyTrajectory,
    noise_scale: f64,
    label_type: AttackType,
    rng: &mut Rng,
    seed: u64,
) -> Result<MotionTrace, SynthError> {
    let camera_open_s: f64 = rng.random_range(0.5..1.0);
    let capture_s = draw_capture_s(rng);
    let (timestamps_ms, times) = grid(DEFAULT_DURATION_S)?;
    let samples = Sensors {
        profile,
        rng: rng_from_seed(derive_path(seed, &[1])),
    }
    .render(traj, &times, noise_scale);
    Ok(MotionTrace {
        trace_id: String::new(),
        participant_id: None,
        samples,
        timestamps_ms,
        camera_open_ms: (camera_open_s * 1000.0).round() as i64,
        capture_ms: (capture_s * 1000.0).round() as i64,
        label: Label::Attack,
        attack_type: label_type,
    })
}

/// An attack proxy. Stationary traces lie flat on a table;
/// handheld traces wander without the capture signature; temporal-shift
/// traces are bona fide motion with the capture stamp moved 1.5 to 3 s later.
pub fn gen_attack(profile: &MotionProfile, kind: AttackType, seed: u64) -> Result<MotionTrace, SynthError> {
    let mut rng = rng_from_seed(seed);
    match kind {
        AttackType::Stationary => {
            // Phone lying on a table.
            let pitch: f64 = rng.random_range(0.0..4.0);
            let quiet = MotionProfile {
                acc_noise: STATIONARY_NOISE,
                gyr_noise: STATIONARY_NOISE * 0.4,
                mag_noise: 0.1,
                ..profile.clone()
            };
            let traj = SteadyTrajectory {
                pitch: f64::to_radians(pitch),
                roll: rng.random_range(-2.0f64..2.0).to_radians(),
                heading: rng.random_range(0.0f64..360.0).to_radians(),
                wander: None,
            };
            steady_trace(&quiet, &traj, 1.0, kind, &mut rng, seed)
        }
        AttackType::Handheld => {
            let wander = profile.wander_deg.max(1.5).to_radians() * 1.5;
            let traj = SteadyTrajectory {
                pitch: jittered(&mut rng, profile.base_tilt_deg + profile.tilt_up_deg * 0.5, 6.0).to_radians(),
                roll: jittered(&mut rng, profile.roll_deg, 4.0).to_radians(),
                heading: jittered(&mut rng, profile.heading_deg, 20.0).to_radians(),
                wander: Some([
                    Wander::new(&mut rng, wander),
                    Wander::new(&mut rng, wander * 0.6),
                    Wander::new(&mut rng, wander * 0.8),
                ]),
            };
            steady_trace(profile, &traj, 1.3, kind, &mut rng, seed)
        }
        AttackType::TemporalShift => {
            let (mut trace, _) = shifted_with_twin(profile, seed)?;
            trace.participant_id = None;
            Ok(trace)
        }
        AttackType::None => Err(SynthError::Timing("attack kind `none` is not an attack".into())),
    }
}

/// The temporal-shift proxy for `seed` and the bona fide trace it came from.
pub fn shifted_with_twin(profile: &MotionProfile, seed: u64) -> Result<(MotionTrace, MotionTrace), SynthError> {
    let mut rng = rng_from_seed(seed);
    let capture_s = draw_capture_s(&mut rng);
    let shift_ms: i64 = rng.random_range(1500..=3000);
    let twin = gen_bonafide(profile, DEFAULT_DURATION_S, capture_s, derive_path(seed, &[2]))?;
    let mut shifted = twin.clone();
    shifted.capture_ms += shift_ms;
    shifted.label = Label::Attack;
    shifted.attack_type = AttackType::TemporalShift;
    Ok((shifted, twin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackCounts {
    pub stationary: usize,
    pub handheld: usize,
    pub temporal_shift: usize,
}

impl Default for AttackCounts {
    fn default() -> Self {
        Self {
            stationary: 6,
            handheld: 11,
            temporal_shift: 18,
        }
    }
}

impl AttackCounts {
    pub fn none() -> Self {
        Self {
            stationary: 0,
            handheld: 0,
            temporal_shift: 0,
        }
    }
}

/// Extra participants used only for attack proxies.
const HANDHELD_PROFILES: usize = 2;
const SHIFT_PROFILES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub traces: Vec<MotionTrace>,
    /// Bona fide twin of every temporal-shift trace, keyed by trace id.
    pub twins: BTreeMap<String, MotionTrace>,
}

fn id_width(n: usize) -> usize {
    n.to_string().len().max(2)
}

/// Generates a corpus of `n_participants × seqs` bona fide traces plus the
/// attack proxies. With no participants the corpus is empty.
pub fn gen_corpus(
    n_participants: usize,
    seqs: usize,
    attacks: AttackCounts,
    seed: u64,
) -> Result<SynthCorpus, SynthError> {
    if n_participants == 0 {
        return Ok(SynthCorpus {
            traces: Vec::new(),
            twins: BTreeMap::new(),
        });
    }
    let profiles: Vec<MotionProfile> = (0..n_participants)
        .map(|p| MotionProfile::sample(Some(p as u32 + 1), derive_path(seed, &[0, p as u64])))
        .collect();
    let (pw, sw) = (id_width(n_participants), id_width(seqs));
    let jobs: Vec<(usize, usize)> = (0..n_participants).flat_map(|p| (0..seqs).map(move |s| (p, s))).collect();
    let mut traces: Vec<MotionTrace> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let trace_seed = derive_path(seed, &[1, p as u64, s as u64]);
            let capture_s = draw_capture_s(&mut rng_from_seed(derive_path(trace_seed, &[9])));
            let mut t = gen_bonafide(&profiles[p], DEFAULT_DURATION_S, capture_s, trace_seed)?;
            t.trace_id = format!("p{:0pw$}_s{:0sw$}", p + 1, s + 1);
            Ok(t)
        })
        .collect::<Result<_, SynthError>>()?;

    let extra = |i: usize| MotionProfile::sample(None, derive_path(seed, &[2, i as u64]));
    let handheld_profiles: Vec<MotionProfile> = (0..HANDHELD_PROFILES).map(extra).collect();
    let shift_profiles: Vec<MotionProfile> =
        (0..SHIFT_PROFILES).map(|i| extra(HANDHELD_PROFILES + i)).collect();

    let aw = id_width(attacks.stationary.max(attacks.handheld).max(attacks.temporal_shift));
    for i in 0..attacks.stationary {
        let mut t = gen_attack(&profiles[i % profiles.len()], AttackType::Stationary, derive_path(seed, &[3, i as u64]))?;
        t.trace_id = format!("stationary_{:0aw$}", i + 1);
        traces.push(t);
    }
    for i in 0..attacks.handheld {
        let profile = &handheld_profiles[i % HANDHELD_PROFILES];
        let mut t = gen_attack(profile, AttackType::Handheld, derive_path(seed, &[4, i as u64]))?;
        t.trace_id = format!("handheld_{:0aw$}", i + 1);
        traces.push(t);
    }
    let mut twins = BTreeMap::new();
    for i in 0..attacks.temporal_shift {
        let profile = &shift_profiles[i % SHIFT_PROFILES];
        let (mut t, mut twin) = shifted_with_twin(profile, derive_path(seed, &[5, i as u64]))?;
        t.participant_id = None;
        t.trace_id = format!("tshift_{:0aw$}", i + 1);
        twin.trace_id = format!("{}_twin", t.trace_id);
        twins.insert(t.trace_id.clone(), twin);
        traces.push(t);
    }
    Ok(SynthCorpus { traces, twins })
}

pub fn write_synth_corpus(dir: &Path, corpus: &SynthCorpus) -> Result<(), SynthError> {
    Ok(write_corpus(dir, &corpus.traces)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{serialize_csv, Channel};

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_noise_gravity_and_hold_physics() {
        let p = MotionProfile::sample(Some(1), 3).zero_noise();
        let t = gen_bonafide(&p, 10.0, 3.2, 1).unwrap();
        for row in &t.samples {
            assert!((norm(&row[12..15]) - GRAVITY).abs() < 1e-6);
        }
        let hold_end = 3.2 + p.hold_s;
        for (row, &ms) in t.samples.iter().zip(&t.timestamps_ms) {
            let s = ms as f64 / 1000.0;
            if s > 3.2 + 0.01 && s < hold_end - 0.01 {
                assert!((norm(&row[0..3]) - GRAVITY).abs() < 1e-6, "t={s}");
            }
        }
    }

    #[test]
    fn bonafide_shows_tilt_signature() {
        let p = MotionProfile::sample(Some(1), 5);
        let t = gen_bonafide(&p, 10.0, 3.2, 2).unwrap();
        let acc_z = t.channel(Channel::AccZ);
        let gyr_x = t.channel(Channel::GyrX);
        let at = |s: f64| (s * 50.0) as usize;
        // z drops while tilting up, and a negative gyro-x burst follows the hold.
        assert!(acc_z[at(3.2)] < acc_z[at(1.0)] - 1.0);
        let after = &gyr_x[at(3.2 + p.hold_s * 0.9)..at(3.2 + p.hold_s * 1.1 + p.tilt_back_s * 1.1 + 0.2)];
        assert!(after.iter().copied().fold(f64::INFINITY, f64::min) < -0.5);
    }

    #[test]
    fn deterministic_bytes() {
        let p = MotionProfile::sample(Some(4), 9);
        let a = gen_bonafide(&p, 10.0, 3.0, 11).unwrap();
        let b = gen_bonafide(&p, 10.0, 3.0, 11).unwrap();
        assert_eq!(serialize_csv(&a), serialize_csv(&b));
    }

    #[test]
    fn infeasible_timing_errors() {
        let p = MotionProfile::sample(Some(1), 1);
        assert!(gen_bonafide(&p, 10.0, 0.3, 1).is_err());
        assert!(gen_bonafide(&p, 4.0, 3.5, 1).is_err());
    }

    #[test]
    fn stationary_is_quiet() {
        let p = MotionProfile::sample(Some(1), 1);
        for seed in 0..6 {
            let t = gen_attack(&p, AttackType::Stationary, seed).unwrap();
            for c in [Channel::AccX, Channel::AccY, Channel::AccZ] {
                let v = t.channel(c);
                let m = v.iter().sum::<f64>() / v.len() as f64;
                let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
                assert!(sd < 0.02, "{sd}");
            }
        }
    }

    #[test]
    fn handheld_lacks_tilt_back_burst() {
        let p = MotionProfile::sample(None, 8);
        for seed in 0..11 {
            let t = gen_attack(&p, AttackType::Handheld, seed).unwrap();
            let g = t.channel(Channel::GyrX);
            for w in g.windows(50) {
                assert!(w.iter().sum::<f64>() / 50.0 >= -0.3);
            }
        }
    }

    #[test]
    fn temporal_shift_keeps_motion() {
        let p = MotionProfile::sample(None, 2);
        let (shifted, twin) = shifted_with_twin(&p, 4).unwrap();
        assert_eq!(shifted.samples, twin.samples);
        let d = shifted.capture_ms - twin.capture_ms;
        assert!((1500..=3000).contains(&d));
        assert_eq!(shifted.attack_type, AttackType::TemporalShift);
    }

    #[test]
    fn corpus_shape() {
        let c = gen_corpus(3, 2, AttackCounts { stationary: 1, handheld: 2, temporal_shift: 3 }, 7).unwrap();
        assert_eq!(c.traces.len(), 6 + 6);
        assert_eq!(c.twins.len(), 3);
        assert_eq!(c.traces[0].trace_id, "p01_s01");
        assert!(c.traces.iter().all(|t| t.validate().is_ok()));
        assert!(gen_corpus(0, 12, AttackCounts::default(), 7).unwrap().traces.is_empty());
    }
}
