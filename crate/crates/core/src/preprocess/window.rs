//! Event-anchored window extraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConditionedTrace, PreprocessError};
use crate::trace::{AttackType, ChannelSelector, Label};

/// A fixed-length multichannel series, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    len: usize,
    n_channels: usize,
    data: Vec<f64>,
}

impl Series {
    pub fn zeros(len: usize, n_channels: usize) -> Self {
        Self {
            len,
            n_channels,
            data: vec![0.0; len * n_channels],
        }
    }

    /// Builds from one `Vec` per channel; all must share a length.
    pub fn from_channels(channels: Vec<Vec<f64>>) -> Self {
        let len = channels.first().map_or(0, Vec::len);
        assert!(channels.iter().all(|c| c.len() == len), "ragged channels");
        let n_channels = channels.len();
        Self {
            len,
            n_channels,
            data: channels.concat(),
        }
    }

    /// Builds from time-major rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let len = rows.len();
        let n_channels = rows.first().map_or(0, Vec::len);
        let mut s = Self::zeros(len, n_channels);
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_channels, "ragged rows");
            for (c, &v) in row.iter().enumerate() {
                s.data[c * len + t] = v;
            }
        }
        s
    }

    pub fn univariate(values: Vec<f64>) -> Self {
        Self::from_channels(vec![values])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.n_channels)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[c * self.len + t]
    }

    /// Channel blocks, each time-major.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Capture-centered window only.
    Single,
    /// Camera-opening window followed by the capture window along time.
    Concat,
    /// Both windows stacked as parallel channels.
    Double,
}

impl FromStr for Representation {
    type Err = PreprocessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "concat" => Ok(Self::Concat),
            "double" => Ok(Self::Double),
            other => Err(PreprocessError::InvalidSpec(format!(
                "unknown representation `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Concat => "concat",
            Self::Double => "double",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub k_open: usize,
    pub pre: usize,
    pub post: usize,
    pub representation: Representation,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            k_open: 10,
            pre: 50,
            post: 150,
            representation: Representation::Single,
        }
    }
}

impl WindowSpec {
    pub fn new(
        k_open: usize,
        pre: usize,
        post: usize,
        representation: Representation,
    ) -> Result<Self, PreprocessError> {
        let spec = Self {
            k_open,
            pre,
            post,
            representation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses `k_open,pre,post` (e.g. `10,50,100`).
    pub fn parse_triplet(s: &str, representation: Representation) -> Result<Self, PreprocessError> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| PreprocessError::InvalidSpec(format!("bad window `{s}`")))?;
        match parts[..] {
            [k_open, pre, post] => Self::new(k_open, pre, post, representation),
            _ => Err(PreprocessError::InvalidSpec(format!(
                "window needs k_open,pre,post: `{s}`"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.post < 1 {
            return Err(PreprocessError::InvalidSpec("post must be >= 1".into()));
        }
        if self.representation == Representation::Double && self.k_open > self.pre + self.post {
            return Err(PreprocessError::InvalidSpec(
                "double representation needs k_open <= pre + post".into(),
            ));
        }
        Ok(())
    }

    /// Output length in samples.
    pub fn length(&self) -> usize {
        match self.representation {
            Representation::Single | Representation::Double => self.pre + self.post,
            Representation::Concat => self.k_open + self.pre + self.post,
        }
    }

    /// Output channel count for `m` selected channels.
    pub fn channels(&self, m: usize) -> usize {
        match self.representation {
            Representation::Double => 2 * m,
            _ => m,
        }
    }

    pub fn uses_open_window(&self) -> bool {
        self.representation != Representation::Single
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}+{}+{} {}",
            self.k_open, self.pre, self.post, self.representation
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub values: Series,
    pub trace_id: String,
    pub participant_id: Option<u32>,
    pub label: Label,
    pub attack_type: AttackType,
    pub spec: WindowSpec,
}

/// Cuts the capture window `W_c` (and the camera-opening window `W_o` when
/// the representation needs it) out of a conditioned trace.
pub fn extract_windows(
    trace: &ConditionedTrace,
    spec: &WindowSpec,
    selector: &ChannelSelector,
) -> Result<WindowedSample, PreprocessError> {
    spec.validate()?;
    let n = trace.len() as i64;
    let out_of_range = |anchor: &'static str, start: i64, end: i64| PreprocessError::WindowOutOfRange {
        trace_id: trace.trace_id.clone(),
        anchor,
        start,
        end,
        available: n as usize,
    };

    let c_start = trace.capture_index - spec.pre as i64;
    let c_end = trace.capture_index + spec.post as i64;
    if c_start < 0 || c_end > n {
        return Err(out_of_range("capture", c_start, c_end));
    }
    let (o_start, o_end) = (
        trace.camera_open_index,
        trace.camera_open_index + spec.k_open as i64,
    );
    if spec.uses_open_window() && (o_start < 0 || o_end > n) {
        return Err(out_of_range("camera_open", o_start, o_end));
    }

    let (c_start, c_end) = (c_start as usize, c_end as usize);
    let (o_start, o_end) = (o_start.max(0) as usize, o_end.max(0) as usize);
    let idx = selector.indices();
    let channels: Vec<Vec<f64>> = match spec.representation {
        Representation::Single => idx
            .iter()
            .map(|&c| trace.channel(c)[c_start..c_end].to_vec())
            .collect(),
        Representation::Concat => idx
            .iter()
            .map(|&c| {
                let ch = trace.channel(c);
                let mut v = ch[o_start..o_end].to_vec();
                v.extend_from_slice(&ch[c_start..c_end]);
                v
            })
            .collect(),
        Representation::Double => {
            let len = spec.pre + spec.post;
            let mut out: Vec<Vec<f64>> = idx
                .iter()
                .map(|&c| trace.channel(c)[c_start..c_end].to_vec())
                .collect();
            out.extend(idx.iter().map(|&c| {
                let mut v = trace.channel(c)[o_start..o_end].to_vec();
                v.resize(len, 0.0);
                v
            }));
            out
        }
    };
    let values = Series::from_channels(channels);
    debug_assert_eq!(values.shape(), (spec.length(), spec.channels(idx.len())));
    Ok(WindowedSample {
        values,
        trace_id: trace.trace_id.clone(),
        participant_id: trace.participant_id,
        label: trace.label,
        attack_type: trace.attack_type,
        spec: *spec,
    })
}
