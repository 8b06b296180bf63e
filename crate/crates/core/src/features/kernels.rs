//! Random convolutional kernels pooled by proportion of positive values and
//! maximum.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_shapes, FeatureError, FeatureMatrix, Provenance};
use crate::preprocess::Series;
use crate::rng::rng_from_seed;

pub const KERNEL_LENGTHS: [usize; 3] = [7, 9, 11];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub length: usize,
    /// Input channels this kernel reads, ascending.
    pub channels: Vec<usize>,
    /// `length` weights per selected channel, channel-major.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    pub padding: usize,
}

impl Kernel {
    /// Dilated receptive field.
    pub fn span(&self) -> usize {
        (self.length - 1) * self.dilation + 1
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len + 2 * self.padding + 1).saturating_sub(self.span())
    }

    /// Convolution output (cross-correlation plus bias) over one sample.
    pub fn convolve(&self, x: &Series) -> Vec<f64> {
        let len = x.len();
        let out_len = self.output_len(len);
        let mut out = vec![self.bias; out_len];
        let pad = self.padding as isize;
        for (k, &c) in self.channels.iter().enumerate() {
            let ch = x.channel(c);
            let w = &self.weights[k * self.length..(k + 1) * self.length];
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, &wj) in w.iter().enumerate() {
                    let idx = i as isize - pad + (j * self.dilation) as isize;
                    if idx >= 0 && (idx as usize) < len {
                        acc += wj * ch[idx as usize];
                    }
                }
                *o += acc;
            }
        }
        out
    }

    /// `(ppv, max)` of the convolution output.
    pub fn features(&self, x: &Series) -> (f64, f64) {
        let out = self.convolve(x);
        let positive = out.iter().filter(|&&v| v > 0.0).count();
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (positive as f64 / out.len() as f64, max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub kernels: Vec<Kernel>,
    pub input_len: usize,
    pub n_channels: usize,
    pub seed: u64,
}

impl KernelBank {
    /// Draws `n_kernels` kernels sized for `input_len × n_channels` samples.
    pub fn generate(n_kernels: usize, input_len: usize, n_channels: usize, seed: u64) -> Self {
        assert!(input_len > 0 && n_channels > 0, "empty input shape");
        let mut rng = rng_from_seed(seed);
        let per_kernel = ((n_channels as f64).sqrt().floor() as usize).max(1);
        let kernels = (0..n_kernels)
            .map(|_| {
                let length = KERNEL_LENGTHS[rng.random_range(0..KERNEL_LENGTHS.len())];
                let mut channels = sample_indices(&mut rng, n_channels, per_kernel).into_vec();
                channels.sort_unstable();
                let mut weights = Vec::with_capacity(length * per_kernel);
                for _ in 0..per_kernel {
                    let w: Vec<f64> = (0..length).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let mean = w.iter().sum::<f64>() / length as f64;
                    weights.extend(w.iter().map(|v| v - mean));
                }
                let bias = rng.random_range(-1.0..1.0);
                let max_exp = if input_len > length {
                    ((input_len - 1) as f64 / (length - 1) as f64).log2()
                } else {
                    0.0
                };
                let dilation = 2f64.powf(rng.random_range(0.0..=max_exp.max(0.0))).floor() as usize;
                let dilation = dilation.max(1);
                let span = (length - 1) * dilation + 1;
                let wants_padding = rng.random_bool(0.5);
                let padding = if wants_padding || span > input_len {
                    ((length - 1) * dilation) / 2
                } else {
                    0
                };
                Kernel {
                    length,
                    channels,
                    weights,
                    bias,
                    dilation,
                    padding,
                }
            })
            .collect();
        Self {
            kernels,
            input_len,
            n_channels,
            seed,
        }
    }

    pub fn n_features(&self) -> usize {
        2 * self.kernels.len()
    }
}

/// `[ppv_0, max_0, ppv_1, max_1, ...]` for one sample.
pub fn kernel_features(sample: &Series, bank: &KernelBank) -> Vec<f64> {
    let mut row = Vec::with_capacity(bank.n_features());
    for k in &bank.kernels {
        let (ppv, max) = k.features(sample);
        row.push(ppv);
        row.push(max);
    }
    row
}

pub fn kernel_transform(samples: &[Series], bank: &KernelBank) -> Result<FeatureMatrix, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::Empty);
    }
    check_shapes(samples, (bank.input_len, bank.n_channels))?;
    let rows: Vec<Vec<f64>> = samples.par_iter().map(|s| kernel_features(s, bank)).collect();
    Ok(FeatureMatrix::from_rows(rows, Provenance::Kernel))
}
