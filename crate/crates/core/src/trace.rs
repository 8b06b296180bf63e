//! Motion-trace data model, the CSV + JSON sidecar corpus format, and grid
//! regularization.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_CHANNELS: usize = 15;

/// Nominal sampling period (50 Hz).
pub const GRID_MS: i64 = 20;

/// Largest gap between consecutive samples that grid regularization bridges.
pub const MAX_GAP_MS: i64 = 200;

pub const CSV_HEADER: &str = "t_ms,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z,mag_x,mag_y,mag_z,lacc_x,lacc_y,lacc_z,grav_x,grav_y,grav_z";

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv header mismatch: expected `{CSV_HEADER}`, found `{found}`")]
    HeaderMismatch { found: String },
    #[error("csv line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("csv line {line}: timestamp {t_ms} ms precedes previous {prev_ms} ms")]
    NonMonotonicTimestamps { line: usize, t_ms: i64, prev_ms: i64 },
    #[error("metadata is missing event timestamp `{0}`")]
    MissingEvent(&'static str),
    #[error("csv line {line}: non-finite value in column `{column}`")]
    NonFiniteValue { line: usize, column: String },
    #[error("capture_ms {capture_ms} precedes camera_open_ms {camera_open_ms}")]
    EventOrder { camera_open_ms: i64, capture_ms: i64 },
    #[error("label {label} is inconsistent with attack_type {attack_type}")]
    LabelMismatch { label: Label, attack_type: AttackType },
    #[error("trace has no samples")]
    Empty,
    #[error("row count {rows} does not match timestamp count {timestamps}")]
    LengthMismatch { rows: usize, timestamps: usize },
    #[error("metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("unrecoverable gap of {gap_ms} ms after t = {at_ms} ms")]
    UnrecoverableGap { at_ms: i64, gap_ms: i64 },
    #[error("unknown channel or selector `{0}`")]
    UnknownChannel(String),
    #[error("channel selector is empty")]
    EmptySelector,
    #[error("channel `{0}` selected twice")]
    DuplicateChannel(String),
    #[error("trace `{trace}`: {source}")]
    InTrace {
        trace: String,
        #[source]
        source: Box<TraceError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> TraceError {
    TraceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The 15 recorded channels in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    AccX,
    AccY,
    AccZ,
    GyrX,
    GyrY,
    GyrZ,
    MagX,
    MagY,
    MagZ,
    LaccX,
    LaccY,
    LaccZ,
    GravX,
    GravY,
    GravZ,
}

impl Channel {
    pub const ALL: [Channel; N_CHANNELS] = [
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::GyrX,
        Channel::GyrY,
        Channel::GyrZ,
        Channel::MagX,
        Channel::MagY,
        Channel::MagZ,
        Channel::LaccX,
        Channel::LaccY,
        Channel::LaccZ,
        Channel::GravX,
        Channel::GravY,
        Channel::GravZ,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        CSV_HEADER.split(',').nth(self.index() + 1).unwrap()
    }

    pub fn is_magnetometer(self) -> bool {
        matches!(self, Channel::MagX | Channel::MagY | Channel::MagZ)
    }
}

impl FromStr for Channel {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| TraceError::UnknownChannel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Attack,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Bonafide => "bonafide",
            Label::Attack => "attack",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    None,
    Stationary,
    Handheld,
    TemporalShift,
}

impl AttackType {
    pub const PROXIES: [AttackType; 3] = [
        AttackType::Stationary,
        AttackType::Handheld,
        AttackType::TemporalShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackType::None => "none",
            AttackType::Stationary => "stationary",
            AttackType::Handheld => "handheld",
            AttackType::TemporalShift => "temporal_shift",
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackType {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [AttackType::None]
            .into_iter()
            .chain(AttackType::PROXIES)
            .find(|a| a.as_str() == s)
            .ok_or_else(|| TraceError::UnknownChannel(s.to_string()))
    }
}

/// One capture attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrace {
    pub trace_id: String,
    pub participant_id: Option<u32>,
    /// `T` rows of 15 channel values in canonical order.
    pub samples: Vec<[f64; N_CHANNELS]>,
    pub timestamps_ms: Vec<i64>,
    pub camera_open_ms: i64,
    pub capture_ms: i64,
    pub label: Label,
    pub attack_type: AttackType,
}

impl MotionTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_bonafide(&self) -> bool {
        self.label == Label::Bonafide
    }

    /// Values of one channel over time.
    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        let c = channel.index();
        self.samples.iter().map(|row| row[c]).collect()
    }

    /// Checks every structural invariant of a trace.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.samples.is_empty() {
            return Err(TraceError::Empty);
        }
        if self.samples.len() != self.timestamps_ms.len() {
            return Err(TraceError::LengthMismatch {
                rows: self.samples.len(),
                timestamps: self.timestamps_ms.len(),
            });
        }
        for (i, w) in self.timestamps_ms.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(TraceError::NonMonotonicTimestamps {
                    line: i + 3,
                    t_ms: w[1],
                    prev_ms: w[0],
                });
            }
        }
        for (i, row) in self.samples.iter().enumerate() {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(TraceError::NonFiniteValue {
                    line: i + 2,
                    column: Channel::ALL[c].name().to_string(),
                });
            }
        }
        if self.capture_ms < self.camera_open_ms {
            return Err(TraceError::EventOrder {
                camera_open_ms: self.camera_open_ms,
                capture_ms: self.capture_ms,
            });
        }
        let consistent = match self.label {
            Label::Bonafide => self.attack_type == AttackType::None,
            Label::Attack => self.attack_type != AttackType::None,
        };
        if !consistent {
            return Err(TraceError::LabelMismatch {
                label: self.label,
                attack_type: self.attack_type,
            });
        }
        Ok(())
    }

    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            trace_id: self.trace_id.clone(),
            participant_id: self.participant_id,
            camera_open_ms: self.camera_open_ms,
            capture_ms: self.capture_ms,
            label: self.label,
            attack_type: self.attack_type,
        }
    }
}

/// Sidecar JSON written next to each trace CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub trace_id: String,
    pub participant_id: Option<u32>,
    pub camera_open_ms: i64,
    pub capture_ms: i64,
    pub label: Label,
    pub attack_type: AttackType,
}

#[derive(Deserialize)]
struct RawMeta {
    trace_id: String,
    #[serde(default)]
    participant_id: Option<u32>,
    camera_open_ms: Option<i64>,
    capture_ms: Option<i64>,
    label: Label,
    attack_type: AttackType,
}

pub fn parse_meta(meta_json: &[u8]) -> Result<TraceMeta, TraceError> {
    let raw: RawMeta = serde_json::from_slice(meta_json)?;
    Ok(TraceMeta {
        trace_id: raw.trace_id,
        participant_id: raw.participant_id,
        camera_open_ms: raw
            .camera_open_ms
            .ok_or(TraceError::MissingEvent("camera_open_ms"))?,
        capture_ms: raw.capture_ms.ok_or(TraceError::MissingEvent("capture_ms"))?,
        label: raw.label,
        attack_type: raw.attack_type,
    })
}

/// Parses the sample table of a trace CSV.
pub fn parse_csv(csv: &[u8]) -> Result<(Vec<i64>, Vec<[f64; N_CHANNELS]>), TraceError> {
    let text = std::str::from_utf8(csv).map_err(|e| TraceError::Malformed {
        line: 0,
        reason: format!("not utf-8: {e}"),
    })?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != CSV_HEADER {
        return Err(TraceError::HeaderMismatch {
            found: header.to_string(),
        });
    }
    let mut timestamps = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t_field = fields.next().unwrap_or("");
        let t_ms: i64 = t_field.trim().parse().map_err(|_| TraceError::Malformed {
            line: line_no,
            reason: format!("bad timestamp `{t_field}`"),
        })?;
        if let Some(&prev_ms) = timestamps.last() {
            if t_ms < prev_ms {
                return Err(TraceError::NonMonotonicTimestamps {
                    line: line_no,
                    t_ms,
                    prev_ms,
                });
            }
        }
        let mut row = [0.0; N_CHANNELS];
        let mut n = 0;
        for field in fields {
            if n == N_CHANNELS {
                return Err(TraceError::Malformed {
                    line: line_no,
                    reason: "too many columns".into(),
                });
            }
            let v: f64 = field.trim().parse().map_err(|_| TraceError::Malformed {
                line: line_no,
                reason: format!("bad value `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(TraceError::NonFiniteValue {
                    line: line_no,
                    column: Channel::ALL[n].name().to_string(),
                });
            }
            row[n] = v;
            n += 1;
        }
        if n != N_CHANNELS {
            return Err(TraceError::Malformed {
                line: line_no,
                reason: format!("expected 16 columns, found {}", n + 1),
            });
        }
        timestamps.push(t_ms);
        samples.push(row);
    }
    if samples.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok((timestamps, samples))
}

/// Parses a trace CSV and its sidecar metadata into a validated trace.
pub fn parse_trace(csv: &[u8], meta_json: &[u8]) -> Result<MotionTrace, TraceError> {
    let meta = parse_meta(meta_json)?;
    let (timestamps_ms, samples) = parse_csv(csv)?;
    let trace = MotionTrace {
        trace_id: meta.trace_id,
        participant_id: meta.participant_id,
        samples,
        timestamps_ms,
        camera_open_ms: meta.camera_open_ms,
        capture_ms: meta.capture_ms,
        label: meta.label,
        attack_type: meta.attack_type,
    };
    trace.validate()?;
    Ok(trace)
}

/// Canonical CSV encoding: fixed header, `\n` line endings, shortest
/// round-trip decimal for every value.
pub fn serialize_csv(trace: &MotionTrace) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(trace.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, row) in trace.timestamps_ms.iter().zip(&trace.samples) {
        write!(out, "{t}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Canonical sidecar encoding (pretty JSON, trailing newline).
pub fn serialize_meta(trace: &MotionTrace) -> String {
    let mut s = serde_json::to_string_pretty(&trace.meta()).expect("meta serializes");
    s.push('\n');
    s
}

/// Maps an event timestamp to the nearest grid index; ties go to the earlier
/// index. Assumes a regularized trace.
pub fn grid_index(trace: &MotionTrace, t_ms: i64) -> i64 {
    let offset = t_ms - trace.timestamps_ms[0];
    let q = offset.div_euclid(GRID_MS);
    let r = offset.rem_euclid(GRID_MS);
    if 2 * r > GRID_MS {
        q + 1
    } else {
        q
    }
}

/// Linearly interpolates a trace onto an exact 20 ms grid anchored at its
/// first timestamp. Event timestamps are kept as-is.
pub fn regularize_grid(trace: &MotionTrace) -> Result<MotionTrace, TraceError> {
    trace.validate()?;
    let ts = &trace.timestamps_ms;
    for w in ts.windows(2) {
        if w[1] - w[0] > MAX_GAP_MS {
            return Err(TraceError::UnrecoverableGap {
                at_ms: w[0],
                gap_ms: w[1] - w[0],
            });
        }
    }
    let t0 = ts[0];
    let t_last = *ts.last().unwrap();
    let n_grid = ((t_last - t0) / GRID_MS + 1) as usize;
    let mut grid_ts = Vec::with_capacity(n_grid);
    let mut grid_samples = Vec::with_capacity(n_grid);
    // `j` is the last original index with ts[j] <= t.
    let mut j = 0usize;
    for k in 0..n_grid {
        let t = t0 + k as i64 * GRID_MS;
        while j + 1 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        let row = if ts[j] == t || j + 1 == ts.len() {
            trace.samples[j]
        } else {
            let (ta, tb) = (ts[j], ts[j + 1]);
            let w = (t - ta) as f64 / (tb - ta) as f64;
            let (a, b) = (&trace.samples[j], &trace.samples[j + 1]);
            let mut row = [0.0; N_CHANNELS];
            for c in 0..N_CHANNELS {
                row[c] = a[c] + (b[c] - a[c]) * w;
            }
            row
        };
        grid_ts.push(t);
        grid_samples.push(row);
    }
    Ok(MotionTrace {
        samples: grid_samples,
        timestamps_ms: grid_ts,
        ..trace.clone()
    })
}

/// An ordered, duplicate-free subset of the 15 channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelSelector {
    name: String,
    channels: Vec<Channel>,
}

impl ChannelSelector {
    pub const PRESETS: [&'static str; 9] = [
        "acc_x", "acc_xyz", "cross_x", "nine", "gyr_xyz", "mag_xyz", "lacc_xyz", "grav_xyz", "all",
    ];

    pub fn new(name: impl Into<String>, channels: Vec<Channel>) -> Result<Self, TraceError> {
        if channels.is_empty() {
            return Err(TraceError::EmptySelector);
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].contains(c) {
                return Err(TraceError::DuplicateChannel(c.name().to_string()));
            }
        }
        Ok(Self {
            name: name.into(),
            channels,
        })
    }

    fn preset(name: &str) -> Option<Vec<Channel>> {
        use Channel::*;
        Some(match name {
            "acc_x" => vec![AccX],
            "acc_xyz" | "3acc" => vec![AccX, AccY, AccZ],
            "cross_x" | "3ch" => vec![AccX, GyrX, MagX],
            "nine" | "9ch" => vec![AccX, AccY, AccZ, GyrX, GyrY, GyrZ, MagX, MagY, MagZ],
            "gyr_xyz" => vec![GyrX, GyrY, GyrZ],
            "mag_xyz" => vec![MagX, MagY, MagZ],
            "lacc_xyz" => vec![LaccX, LaccY, LaccZ],
            "grav_xyz" => vec![GravX, GravY, GravZ],
            "all" => Channel::ALL.to_vec(),
            _ => return None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn indices(&self) -> Vec<usize> {
        self.channels.iter().map(|c| c.index()).collect()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

impl FromStr for ChannelSelector {
    type Err = TraceError;

    /// Accepts a preset name or a comma-separated list of channel names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(channels) = Self::preset(s) {
            return Self::new(s, channels);
        }
        let channels = s
            .split(',')
            .map(|p| p.trim().parse::<Channel>())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(s, channels)
    }
}

impl Default for ChannelSelector {
    fn default() -> Self {
        "acc_xyz".parse().expect("preset exists")
    }
}

impl fmt::Display for ChannelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for ChannelSelector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de> Deserialize<'de> for ChannelSelector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub trace_ids: Vec<String>,
}

/// Reads a corpus directory in manifest order.
pub fn read_corpus(dir: &Path) -> Result<Vec<MotionTrace>, TraceError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    manifest
        .trace_ids
        .iter()
        .map(|id| read_trace(dir, id))
        .collect()
}

/// Reads `<id>.csv` + `<id>.json` from `dir`.
pub fn read_trace(dir: &Path, id: &str) -> Result<MotionTrace, TraceError> {
    let csv_path = dir.join(format!("{id}.csv"));
    let meta_path = dir.join(format!("{id}.json"));
    let csv = fs::read(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let meta = fs::read(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    parse_trace(&csv, &meta).map_err(|e| TraceError::InTrace {
        trace: id.to_string(),
        source: Box::new(e),
    })
}

/// Writes traces and a manifest into `dir` (created if missing).
pub fn write_corpus(dir: &Path, traces: &[MotionTrace]) -> Result<(), TraceError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for t in traces {
        let csv_path = dir.join(format!("{}.csv", t.trace_id));
        fs::write(&csv_path, serialize_csv(t)).map_err(|e| io_err(&csv_path, e))?;
        let meta_path = dir.join(format!("{}.json", t.trace_id));
        fs::write(&meta_path, serialize_meta(t)).map_err(|e| io_err(&meta_path, e))?;
    }
    let manifest = Manifest {
        trace_ids: traces.iter().map(|t| t.trace_id.clone()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}
