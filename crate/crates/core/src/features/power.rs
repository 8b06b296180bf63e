//! Per-column Yeo-Johnson power transform with maximum-likelihood lambda,
//! followed by standardization.

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, Provenance};

const LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
const LAMBDA_TOL: f64 = 1e-4;

pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < 1e-12 {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else if (lambda - 2.0).abs() < 1e-12 {
        -(-x).ln_1p()
    } else {
        -((2.0 - lambda) * (-x).ln_1p()).exp_m1() / (2.0 - lambda)
    }
}

/// Profile log-likelihood of `lambda` under a normal model.
fn log_likelihood(column: &[f64], lambda: f64) -> f64 {
    let n = column.len() as f64;
    let t: Vec<f64> = column.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = column.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Golden-section search for the maximizing lambda.
fn fit_lambda(column: &[f64]) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LAMBDA_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = log_likelihood(column, c);
    let mut fd = log_likelihood(column, d);
    while b - a > LAMBDA_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = log_likelihood(column, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = log_likelihood(column, d);
        }
    }
    (a + b) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub lambda: f64,
    pub mean: f64,
    pub scale: f64,
    /// Zero-variance training column: lambda fit skipped, values only centered.
    pub degenerate: bool,
}

impl ColumnTransform {
    pub fn apply(&self, x: f64) -> f64 {
        if self.degenerate {
            x - self.mean
        } else {
            (yeo_johnson(x, self.lambda) - self.mean) / self.scale
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTransform {
    pub columns: Vec<ColumnTransform>,
}

impl PowerTransform {
    /// Fits on training rows only.
    pub fn fit(matrix: &FeatureMatrix) -> Result<Self, FeatureError> {
        if matrix.n_rows() == 0 {
            return Err(FeatureError::Empty);
        }
        let columns = (0..matrix.n_cols())
            .map(|j| fit_column(&matrix.column(j)))
            .collect();
        Ok(Self { columns })
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.columns.len() {
            return Err(FeatureError::ColumnMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        Ok(row.iter().zip(&self.columns).map(|(&x, t)| t.apply(x)).collect())
    }

    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        let rows = matrix
            .rows()
            .map(|r| self.apply_row(r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureMatrix::from_rows(rows, Provenance::PowerTransformed))
    }
}

fn fit_column(col: &[f64]) -> ColumnTransform {
    let n = col.len() as f64;
    let first = col[0];
    if col.iter().all(|&v| v == first) {
        return ColumnTransform {
            lambda: 1.0,
            mean: first,
            scale: 1.0,
            degenerate: true,
        };
    }
    let lambda = fit_lambda(col);
    let t: Vec<f64> = col.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 && var.is_finite() { var.sqrt() } else { 1.0 };
    ColumnTransform {
        lambda,
        mean,
        scale,
        degenerate: false,
    }
}
