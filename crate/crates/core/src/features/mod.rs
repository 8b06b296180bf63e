//! Sample-to-feature transforms: random convolutional kernels, quantiles over
//! dyadic intervals, raw flattening, and the Yeo-Johnson power transform.

mod kernels;
mod power;
mod quant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kernels::{kernel_transform, kernel_features, Kernel, KernelBank, KERNEL_LENGTHS};
pub use power::{yeo_johnson, ColumnTransform, PowerTransform};
pub use quant::{
    quant_feature_count, quant_features, quant_intervals, quant_transform, quantiles, QuantConfig,
};

use crate::preprocess::Series;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("sample {index} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("sample length {len} is too short: {reason}")]
    TooShort { len: usize, reason: String },
    #[error("no samples to transform")]
    Empty,
    #[error("matrix has {found} columns, transform was fitted on {expected}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kernel,
    Quant,
    RawFlat,
    PowerTransformed,
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    pub provenance: Provenance,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, provenance: Provenance) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged feature rows");
        Self {
            n_rows,
            n_cols,
            data: rows.concat(),
            provenance,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Checks that every sample shares the first sample's shape.
pub fn common_shape(samples: &[Series]) -> Result<(usize, usize), FeatureError> {
    let first = samples.first().ok_or(FeatureError::Empty)?.shape();
    check_shapes(samples, first)?;
    Ok(first)
}

pub(crate) fn check_shapes(samples: &[Series], expected: (usize, usize)) -> Result<(), FeatureError> {
    for (index, s) in samples.iter().enumerate() {
        if s.shape() != expected {
            return Err(FeatureError::ShapeMismatch {
                index,
                expected,
                found: s.shape(),
            });
        }
    }
    Ok(())
}

/// Concatenates channel blocks (each time-major) into one row per sample.
pub fn flatten_raw(samples: &[Series]) -> Result<FeatureMatrix, FeatureError> {
    common_shape(samples)?;
    Ok(FeatureMatrix::from_rows(
        samples.iter().map(|s| s.as_flat().to_vec()).collect(),
        Provenance::RawFlat,
    ))
}
