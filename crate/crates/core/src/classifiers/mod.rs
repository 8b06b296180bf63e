//! Closed-set participant classifiers whose per-class probabilities serve as
//! verification scores (higher = more genuine).

mod extra_trees;
mod logistic;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extra_trees::ExtraTrees;
pub use logistic::{softmax_in_place, FitTrace, Logistic, LogisticObjective, GRAD_TOL};

use crate::features::{
    common_shape, kernel_features, kernel_transform, quant_features, FeatureError, KernelBank,
    PowerTransform, QuantConfig,
};
use crate::preprocess::Series;
use crate::protocols::Direction;
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("degenerate training labels: {0}")]
    DegenerateClasses(String),
    #[error("claimed identity {0} is not an enrolled class")]
    UnknownClaim(u32),
    #[error("logistic regression did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, loss {loss:.6})")]
    Convergence {
        iterations: usize,
        grad_norm: f64,
        loss: f64,
    },
    #[error("probe shape {found:?} does not match training shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    QuantEt,
    KernelLogit,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::QuantEt, ClassifierKind::KernelLogit];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::QuantEt => "quant_et",
            ClassifierKind::KernelLogit => "kernel_logit",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::QuantEt => "QUANT",
            ClassifierKind::KernelLogit => "Kernel + logistic",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ClassifierError::InvalidConfig(format!("unknown classifier `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    QuantEt {
        n_trees: usize,
        /// Fraction of features tried at each split.
        max_features: f64,
        quant: QuantConfig,
    },
    KernelLogit {
        n_kernels: usize,
        l2: f64,
        max_iter: usize,
    },
}

impl ClassifierConfig {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::QuantEt => Self::QuantEt {
                n_trees: 200,
                max_features: 0.1,
                quant: QuantConfig::default(),
            },
            ClassifierKind::KernelLogit => Self::KernelLogit {
                n_kernels: 1024,
                l2: 1e-2,
                max_iter: 5000,
            },
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::QuantEt { .. } => ClassifierKind::QuantEt,
            Self::KernelLogit { .. } => ClassifierKind::KernelLogit,
        }
    }

    /// Fits on samples labeled with participant ids.
    pub fn fit(&self, samples: &[Series], labels: &[u32], seed: u64) -> Result<FittedClassifier, ClassifierError> {
        if samples.len() != labels.len() {
            return Err(ClassifierError::LabelCount {
                samples: samples.len(),
                labels: labels.len(),
            });
        }
        let classes: Vec<u32> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if classes.len() < 2 {
            return Err(ClassifierError::DegenerateClasses(format!(
                "need at least 2 classes, found {}",
                classes.len()
            )));
        }
        for &c in &classes {
            let n = labels.iter().filter(|&&l| l == c).count();
            if n < 2 {
                return Err(ClassifierError::DegenerateClasses(format!(
                    "class {c} has {n} sample(s), need at least 2"
                )));
            }
        }
        let input_shape = common_shape(samples)?;
        let y: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap())
            .collect();
        let model = match *self {
            Self::QuantEt {
                n_trees,
                max_features,
                quant,
            } => {
                if n_trees == 0 || !(max_features > 0.0 && max_features <= 1.0) {
                    return Err(ClassifierError::InvalidConfig(
                        "n_trees >= 1 and max_features in (0, 1] required".into(),
                    ));
                }
                let rows: Vec<Vec<f64>> = samples
                    .par_iter()
                    .map(|s| quant_features(s, &quant))
                    .collect::<Result<_, _>>()?;
                Model::QuantEt(ExtraTrees::fit(&rows, &y, classes.len(), n_trees, max_features, seed))
            }
            Self::KernelLogit {
                n_kernels,
                l2,
                max_iter,
            } => {
                if n_kernels == 0 || l2.is_nan() || l2 <= 0.0 {
                    return Err(ClassifierError::InvalidConfig(
                        "n_kernels >= 1 and l2 > 0 required".into(),
                    ));
                }
                let bank = KernelBank::generate(n_kernels, input_shape.0, input_shape.1, derive_seed(seed, 0));
                let features = kernel_transform(samples, &bank)?;
                let power = PowerTransform::fit(&features)?;
                let rows = power.apply(&features)?.to_rows();
                let (logit, trace) = Logistic::fit(&rows, &y, classes.len(), l2, max_iter)?;
                log::debug!(
                    "kernel_logit converged in {} iterations (|g| = {:.2e})",
                    trace.iterations,
                    trace.grad_norm
                );
                Model::KernelLogit { bank, power, logit }
            }
        };
        Ok(FittedClassifier {
            config: Some(*self),
            seed,
            classes,
            input_shape,
            model,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    QuantEt(ExtraTrees),
    KernelLogit {
        bank: KernelBank,
        power: PowerTransform,
        logit: Logistic,
    },
    Uniform,
}

/// An immutable trained identification model with a fixed class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    config: Option<ClassifierConfig>,
    seed: u64,
    classes: Vec<u32>,
    input_shape: (usize, usize),
    model: Model,
}

impl FittedClassifier {
    /// A model assigning equal probability to every class.
    pub fn uniform(classes: Vec<u32>, input_shape: (usize, usize)) -> Self {
        Self {
            config: None,
            seed: 0,
            classes,
            input_shape,
            model: Model::Uniform,
        }
    }

    pub fn config(&self) -> Option<&ClassifierConfig> {
        self.config.as_ref()
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Verification scores reject below the threshold.
    pub fn direction(&self) -> Direction {
        Direction::RejectBelow
    }

    /// Class probabilities in [`FittedClassifier::classes`] order.
    pub fn predict_proba(&self, probe: &Series) -> Result<Vec<f64>, ClassifierError> {
        if probe.shape() != self.input_shape {
            return Err(ClassifierError::ShapeMismatch {
                expected: self.input_shape,
                found: probe.shape(),
            });
        }
        Ok(match &self.model {
            Model::QuantEt(et) => {
                let Some(ClassifierConfig::QuantEt { quant, .. }) = self.config else {
                    unreachable!("quant_et model without quant config");
                };
                et.predict_proba(&quant_features(probe, &quant)?)
            }
            Model::KernelLogit { bank, power, logit } => {
                logit.predict_proba(&power.apply_row(&kernel_features(probe, bank))?)
            }
            Model::Uniform => vec![1.0 / self.classes.len() as f64; self.classes.len()],
        })
    }

    pub fn class_index(&self, id: u32) -> Result<usize, ClassifierError> {
        self.classes
            .binary_search(&id)
            .map_err(|_| ClassifierError::UnknownClaim(id))
    }

    /// Probability assigned to the claimed identity.
    pub fn verification_score(&self, probe: &Series, claimed_id: u32) -> Result<f64, ClassifierError> {
        let idx = self.class_index(claimed_id)?;
        Ok(self.predict_proba(probe)?[idx])
    }

    pub fn predict(&self, probe: &Series) -> Result<u32, ClassifierError> {
        let p = self.predict_proba(probe)?;
        let best = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        Ok(self.classes[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_set() -> (Vec<Series>, Vec<u32>) {
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let class = if i % 2 == 0 { 4 } else { 9 };
            let base = if class == 4 { 0.0 } else { 3.0 };
            samples.push(Series::univariate(
                (0..32).map(|t| base + ((t + i) as f64 * 0.4).sin() * 0.2).collect(),
            ));
            labels.push(class);
        }
        (samples, labels)
    }

    #[test]
    fn uniform_classifier_scores() {
        let ids: Vec<u32> = (1..=30).collect();
        let c = FittedClassifier::uniform(ids, (8, 1));
        let probe = Series::zeros(8, 1);
        for id in 1..=30 {
            assert!((c.verification_score(&probe, id).unwrap() - 1.0 / 30.0).abs() < 1e-15);
        }
        assert!(matches!(
            c.verification_score(&probe, 31),
            Err(ClassifierError::UnknownClaim(31))
        ));
    }

    #[test]
    fn quant_et_separates_and_is_deterministic() {
        let (samples, labels) = two_class_set();
        let cfg = ClassifierConfig::QuantEt {
            n_trees: 30,
            max_features: 0.2,
            quant: QuantConfig { depth: 3, divisor: 4 },
        };
        let a = cfg.fit(&samples, &labels, 5).unwrap();
        let b = cfg.fit(&samples, &labels, 5).unwrap();
        assert_eq!(a, b);
        for (s, &y) in samples.iter().zip(&labels) {
            assert_eq!(a.predict(s).unwrap(), y);
            let p = a.predict_proba(s).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let max = p.iter().copied().fold(0.0, f64::max);
            assert_eq!(a.verification_score(s, y).unwrap(), max);
        }
    }

    #[test]
    fn kernel_logit_fits() {
        let (samples, labels) = two_class_set();
        let cfg = ClassifierConfig::KernelLogit {
            n_kernels: 50,
            l2: 1.0,
            max_iter: 2000,
        };
        let m = cfg.fit(&samples, &labels, 1).unwrap();
        for (s, &y) in samples.iter().zip(&labels) {
            let p = m.predict_proba(s).unwrap();
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(m.predict(s).unwrap(), y);
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        let (samples, mut labels) = two_class_set();
        let cfg = ClassifierConfig::default_for(ClassifierKind::QuantEt);
        labels.iter_mut().for_each(|l| *l = 1);
        assert!(matches!(
            cfg.fit(&samples, &labels, 0),
            Err(ClassifierError::DegenerateClasses(_))
        ));
        labels[0] = 2;
        assert!(matches!(
            cfg.fit(&samples, &labels, 0),
            Err(ClassifierError::DegenerateClasses(_))
        ));
    }
}
