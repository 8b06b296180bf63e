//! Mean distance to the k nearest references.

use super::dtw::dtw_distance;
use super::DetectorError;
use crate::preprocess::Series;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclid,
    Dtw { band: Option<f64> },
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean of the `k` smallest distances. Equal distances keep reference order.
pub fn mean_k_smallest(distances: &[f64], k: usize) -> Result<f64, DetectorError> {
    if k == 0 {
        return Err(DetectorError::InvalidConfig("k must be >= 1".into()));
    }
    if distances.len() < k {
        return Err(DetectorError::TooFewSamples {
            needed: k,
            found: distances.len(),
        });
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&i, &j| distances[i].total_cmp(&distances[j]).then(i.cmp(&j)));
    Ok(order[..k].iter().map(|&i| distances[i]).sum::<f64>() / k as f64)
}

/// kNN score of a feature row against reference rows.
pub fn knn_score_rows(references: &[Vec<f64>], probe: &[f64], k: usize) -> Result<f64, DetectorError> {
    for r in references {
        if r.len() != probe.len() {
            return Err(DetectorError::ShapeMismatch {
                expected: (r.len(), 1),
                found: (probe.len(), 1),
            });
        }
    }
    let d: Vec<f64> = references.iter().map(|r| euclidean(r, probe)).collect();
    mean_k_smallest(&d, k)
}

/// kNN score of a sample against reference samples.
pub fn knn_score(references: &[Series], probe: &Series, k: usize, metric: Metric) -> Result<f64, DetectorError> {
    let d = references
        .iter()
        .map(|r| match metric {
            Metric::Euclid => {
                if r.shape() != probe.shape() {
                    return Err(DetectorError::ShapeMismatch {
                        expected: r.shape(),
                        found: probe.shape(),
                    });
                }
                Ok(euclidean(r.as_flat(), probe.as_flat()))
            }
            Metric::Dtw { band } => dtw_distance(r, probe, band),
        })
        .collect::<Result<Vec<_>, _>>()?;
    mean_k_smallest(&d, k)
}
