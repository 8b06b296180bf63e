//! Random-kernel features, power transform, and bagged kNN distance scoring.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::knn::{euclidean, mean_k_smallest};
use super::DetectorError;
use crate::features::{kernel_features, kernel_transform, KernelBank, PowerTransform};
use crate::preprocess::Series;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rockad {
    bank: KernelBank,
    power: PowerTransform,
    /// Transformed features of every training sample.
    reference: Vec<Vec<f64>>,
    /// Bootstrap draws (indices into `reference`) per estimator.
    estimators: Vec<Vec<usize>>,
    k: usize,
}

impl Rockad {
    pub fn fit(
        train: &[Series],
        n_estimators: usize,
        n_kernels: usize,
        k: usize,
        seed: u64,
    ) -> Result<Self, DetectorError> {
        if train.len() < k + 1 {
            return Err(DetectorError::TooFewSamples {
                needed: k + 1,
                found: train.len(),
            });
        }
        if n_estimators == 0 || n_kernels == 0 || k == 0 {
            return Err(DetectorError::InvalidConfig(
                "n_estimators, n_kernels and k must be >= 1".into(),
            ));
        }
        let (len, channels) = train[0].shape();
        let bank = KernelBank::generate(n_kernels, len, channels, derive_seed(seed, 0));
        let features = kernel_transform(train, &bank)?;
        let power = PowerTransform::fit(&features)?;
        let reference = power.apply(&features)?.to_rows();
        let n = reference.len();
        let estimators = (0..n_estimators)
            .map(|e| {
                let mut rng = rng_from_seed(derive_seed(seed, 1 + e as u64));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            })
            .collect();
        Ok(Self {
            bank,
            power,
            reference,
            estimators,
            k,
        })
    }

    /// Builds a detector from explicit parts; used to exercise scoring on
    /// hand-made banks.
    pub fn from_parts(
        bank: KernelBank,
        power: PowerTransform,
        reference: Vec<Vec<f64>>,
        estimators: Vec<Vec<usize>>,
        k: usize,
    ) -> Self {
        Self {
            bank,
            power,
            reference,
            estimators,
            k,
        }
    }

    pub fn n_estimators(&self) -> usize {
        self.estimators.len()
    }

    pub fn estimators(&self) -> &[Vec<usize>] {
        &self.estimators
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.bank.input_len, self.bank.n_channels)
    }

    pub fn embed(&self, probe: &Series) -> Result<Vec<f64>, DetectorError> {
        if probe.shape() != self.input_shape() {
            return Err(DetectorError::ShapeMismatch {
                expected: self.input_shape(),
                found: probe.shape(),
            });
        }
        Ok(self.power.apply_row(&kernel_features(probe, &self.bank))?)
    }

    /// Mean over estimators of the mean distance to the k nearest members of
    /// that estimator's bootstrap set.
    pub fn score(&self, probe: &Series) -> Result<f64, DetectorError> {
        let z = self.embed(probe)?;
        let dist: Vec<f64> = self.reference.iter().map(|r| euclidean(r, &z)).collect();
        let mut total = 0.0;
        let mut gathered = Vec::new();
        for members in &self.estimators {
            gathered.clear();
            gathered.extend(members.iter().map(|&i| dist[i]));
            total += mean_k_smallest(&gathered, self.k)?;
        }
        Ok(total / self.estimators.len() as f64)
    }
}
