//! Quantiles over dyadic intervals of a series and its first and second
//! differences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{common_shape, FeatureError, FeatureMatrix, Provenance};
use crate::preprocess::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantConfig {
    pub depth: usize,
    pub divisor: usize,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self { depth: 6, divisor: 4 }
    }
}

impl QuantConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.depth < 1 || self.divisor < 1 {
            return Err(FeatureError::InvalidConfig(format!(
                "depth and divisor must be >= 1 (got {}, {})",
                self.depth, self.divisor
            )));
        }
        Ok(())
    }

    /// Shortest sample accepted.
    pub fn min_len(&self) -> usize {
        (1usize << (self.depth - 1)).max(3)
    }
}

/// Half-open intervals over a series of length `len`: for each level
/// `d = 1..=depth` with `2^(d-1) <= len`, the `2^(d-1)` tiles with boundaries
/// `floor(i * len / n)`, followed (from the second level on, when tiles are at
/// least two long) by the tiles shifted right by half a tile.
pub fn quant_intervals(len: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for d in 0..depth {
        let n = 1usize << d;
        if n > len {
            break;
        }
        let bounds: Vec<usize> = (0..=n).map(|i| i * len / n).collect();
        out.extend(bounds.windows(2).map(|w| (w[0], w[1])));
        if n > 1 && len >= 2 * n {
            let shift = len.div_ceil(2 * n);
            out.extend(
                bounds
                    .windows(2)
                    .take(n - 1)
                    .map(|w| (w[0] + shift, (w[1] + shift).min(len))),
            );
        }
    }
    out
}

/// `ceil(m / divisor)` evenly spaced quantiles (linear interpolation between
/// order statistics); a single quantile is the median.
pub fn quantiles(values: &[f64], divisor: usize) -> Vec<f64> {
    let m = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = m.div_ceil(divisor);
    let at = |p: f64| {
        let pos = p * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        let frac = pos - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    };
    if q == 1 {
        vec![at(0.5)]
    } else {
        (0..q).map(|k| at(k as f64 / (q - 1) as f64)).collect()
    }
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Length of each representation for an input of length `len`.
fn representation_lengths(len: usize) -> [usize; 3] {
    [len, len - 1, len - 2]
}

pub fn quant_feature_count(len: usize, n_channels: usize, config: &QuantConfig) -> usize {
    representation_lengths(len)
        .iter()
        .map(|&l| {
            quant_intervals(l, config.depth)
                .iter()
                .map(|(a, b)| (b - a).div_ceil(config.divisor))
                .sum::<usize>()
        })
        .sum::<usize>()
        * n_channels
}

/// Features for one sample, ordered representation, level, interval,
/// channel, quantile.
pub fn quant_features(sample: &Series, config: &QuantConfig) -> Result<Vec<f64>, FeatureError> {
    config.validate()?;
    let len = sample.len();
    if len < config.min_len() {
        return Err(FeatureError::TooShort {
            len,
            reason: format!("depth {} needs at least {}", config.depth, config.min_len()),
        });
    }
    let mut reps: [Vec<Vec<f64>>; 3] = Default::default();
    for c in 0..sample.n_channels() {
        let raw = sample.channel(c).to_vec();
        let d1 = diff(&raw);
        let d2 = diff(&d1);
        reps[0].push(raw);
        reps[1].push(d1);
        reps[2].push(d2);
    }
    let mut out = Vec::new();
    for rep in &reps {
        let l = rep[0].len();
        for (a, b) in quant_intervals(l, config.depth) {
            for ch in rep {
                out.extend(quantiles(&ch[a..b], config.divisor));
            }
        }
    }
    Ok(out)
}

pub fn quant_transform(samples: &[Series], config: &QuantConfig) -> Result<FeatureMatrix, FeatureError> {
    common_shape(samples)?;
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| quant_features(s, config))
        .collect::<Result<_, _>>()?;
    Ok(FeatureMatrix::from_rows(rows, Provenance::Quant))
}
