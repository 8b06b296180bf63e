//! Signal conditioning (grid regularization, magnetometer debiasing,
//! low-pass filtering) and event-anchored window extraction.

mod filter;
mod magnetometer;
mod window;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::Butterworth;
pub use magnetometer::{condition_magnetometer, debias_magnetometer};
pub use window::{extract_windows, Representation, Series, WindowSpec, WindowedSample};

use crate::trace::{
    grid_index, regularize_grid, AttackType, Channel, ChannelSelector, Label, MotionTrace,
    TraceError, N_CHANNELS,
};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("series of length {len} is shorter than the filter minimum {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("invalid Butterworth design: order {order}, cutoff {cutoff_hz} Hz, fs {fs_hz} Hz")]
    FilterDesign {
        order: usize,
        cutoff_hz: f64,
        fs_hz: f64,
    },
    #[error("trace `{trace_id}`: {anchor} window [{start}, {end}) out of range for {available} samples")]
    WindowOutOfRange {
        trace_id: String,
        anchor: &'static str,
        start: i64,
        end: i64,
        available: usize,
    },
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Conditioning settings shared by every pipeline stage that turns a raw
/// trace into windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub cutoff_hz: f64,
    pub fs_hz: f64,
    pub filter_order: usize,
    /// Disable to skip the low-pass stage entirely.
    pub filter: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 12.5,
            fs_hz: 50.0,
            filter_order: 4,
            filter: true,
        }
    }
}

impl PreprocessConfig {
    pub fn butterworth(&self) -> Result<Option<Butterworth>, PreprocessError> {
        if self.filter {
            Butterworth::lowpass(self.filter_order, self.cutoff_hz, self.fs_hz).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Zero-phase 12.5 Hz (default) Butterworth low-pass of a single channel.
pub fn lowpass_filter(
    series: &[f64],
    cutoff_hz: f64,
    fs_hz: f64,
    order: usize,
) -> Result<Vec<f64>, PreprocessError> {
    Butterworth::lowpass(order, cutoff_hz, fs_hz)?.filtfilt(series)
}

/// A regularized trace with every channel conditioned and both workflow
/// events mapped to grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedTrace {
    pub trace_id: String,
    pub participant_id: Option<u32>,
    pub label: Label,
    pub attack_type: AttackType,
    pub camera_open_index: i64,
    pub capture_index: i64,
    channels: Vec<Vec<f64>>,
}

impl ConditionedTrace {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }
}

fn mag_rows(trace: &MotionTrace) -> Vec<[f64; 3]> {
    let m = Channel::MagX.index();
    trace
        .samples
        .iter()
        .map(|r| [r[m], r[m + 1], r[m + 2]])
        .collect()
}

/// Conditions only the requested channels of an already regularized trace.
/// The magnetometer always goes through centering, normalization, filtering
/// and differencing as a 3-vector; other channels are filtered independently.
pub fn condition_channels(
    trace: &MotionTrace,
    config: &PreprocessConfig,
    channels: &[Channel],
) -> Result<Vec<Vec<f64>>, PreprocessError> {
    let filter = config.butterworth()?;
    let mag = if channels.iter().any(|c| c.is_magnetometer()) {
        Some(condition_magnetometer(&mag_rows(trace), filter.as_ref())?)
    } else {
        None
    };
    channels
        .iter()
        .map(|&c| {
            if c.is_magnetometer() {
                let axis = c.index() - Channel::MagX.index();
                Ok(mag.as_ref().unwrap().iter().map(|v| v[axis]).collect())
            } else {
                let raw = trace.channel(c);
                match &filter {
                    Some(f) => f.filtfilt(&raw),
                    None => Ok(raw),
                }
            }
        })
        .collect()
}

/// Regularizes and conditions all 15 channels.
pub fn condition_trace(
    trace: &MotionTrace,
    config: &PreprocessConfig,
) -> Result<ConditionedTrace, PreprocessError> {
    let grid = regularize_grid(trace)?;
    let channels = condition_channels(&grid, config, &Channel::ALL)?;
    debug_assert_eq!(channels.len(), N_CHANNELS);
    Ok(ConditionedTrace {
        trace_id: grid.trace_id.clone(),
        participant_id: grid.participant_id,
        label: grid.label,
        attack_type: grid.attack_type,
        camera_open_index: grid_index(&grid, grid.camera_open_ms),
        capture_index: grid_index(&grid, grid.capture_ms),
        channels,
    })
}

/// Full path from a raw trace to one windowed sample.
pub fn window_trace(
    trace: &MotionTrace,
    config: &PreprocessConfig,
    spec: &WindowSpec,
    selector: &ChannelSelector,
) -> Result<WindowedSample, PreprocessError> {
    let conditioned = condition_trace(trace, config)?;
    extract_windows(&conditioned, spec, selector)
}

/// A trace that could not be windowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub trace_id: String,
    pub reason: String,
}

/// Windows every trace, in input order. Traces whose windows do not fit are
/// excluded and logged rather than truncated.
pub fn prepare_samples(
    traces: &[MotionTrace],
    config: &PreprocessConfig,
    spec: &WindowSpec,
    selector: &ChannelSelector,
) -> Result<(Vec<WindowedSample>, Vec<Exclusion>), PreprocessError> {
    let results: Vec<_> = traces
        .par_iter()
        .map(|t| window_trace(t, config, spec, selector))
        .collect();
    let mut samples = Vec::with_capacity(traces.len());
    let mut excluded = Vec::new();
    for (trace, result) in traces.iter().zip(results) {
        match result {
            Ok(s) => samples.push(s),
            Err(e @ PreprocessError::WindowOutOfRange { .. }) => {
                log::warn!("excluding trace {}: {e}", trace.trace_id);
                excluded.push(Exclusion {
                    trace_id: trace.trace_id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((samples, excluded))
}
