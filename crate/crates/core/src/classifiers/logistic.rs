//! L2-regularized multinomial logistic regression fitted with L-BFGS and an
//! Armijo backtracking line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

pub const GRAD_TOL: f64 = 1e-6;
const HISTORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (intercepts unpenalized).
/// Parameters are laid out as `n_classes` weight rows followed by
/// `n_classes` intercepts.
pub struct LogisticObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub l2: f64,
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl LogisticObjective<'_> {
    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * (self.n_features() + 1)
    }

    fn logits(&self, params: &[f64], row: &[f64]) -> Vec<f64> {
        let f = self.n_features();
        let bias = &params[self.n_classes * f..];
        (0..self.n_classes)
            .map(|c| {
                let w = &params[c * f..(c + 1) * f];
                w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + bias[c]
            })
            .collect()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.loss_and_grad(params).0
    }

    pub fn loss_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let f = self.n_features();
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let z = self.logits(params, row);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[y];
            for c in 0..self.n_classes {
                let p = (z[c] - lse).exp();
                let r = if c == y { p - 1.0 } else { p };
                let g = &mut grad[c * f..(c + 1) * f];
                for (gj, xj) in g.iter_mut().zip(row) {
                    *gj += r * xj;
                }
                grad[self.n_classes * f + c] += r;
            }
        }
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        let weights = self.n_classes * f;
        loss += 0.5 * self.l2 * params[..weights].iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad[..weights].iter_mut().zip(&params[..weights]) {
            *g += self.l2 * w;
        }
        (loss, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value after each accepted step, starting at the initial point.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub n_classes: usize,
    pub n_features: usize,
    pub params: Vec<f64>,
}

impl Logistic {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        l2: f64,
        max_iter: usize,
    ) -> Result<(Self, FitTrace), ClassifierError> {
        let objective = LogisticObjective {
            rows,
            labels,
            n_classes,
            l2,
        };
        let mut x = vec![0.0; objective.n_params()];
        let (mut fx, mut g) = objective.loss_and_grad(&x);
        let mut losses = vec![fx];
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut iterations = 0;
        while norm(&g) >= GRAD_TOL {
            if iterations == max_iter {
                return Err(ClassifierError::Convergence {
                    iterations,
                    grad_norm: norm(&g),
                    loss: fx,
                });
            }
            iterations += 1;

            // Two-loop recursion for the quasi-Newton direction.
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &q);
                q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|v| *v *= gamma);
            } else {
                let scale = 1.0 / norm(&g).max(1.0);
                q.iter_mut().for_each(|v| *v *= scale);
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
            }
            let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dot(&g, &dir);
            if slope >= 0.0 {
                // Not a descent direction; restart from steepest descent.
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }

            let mut step = 1.0;
            let (x_new, f_new, g_new) = loop {
                let cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
                let (fc, gc) = objective.loss_and_grad(&cand);
                if fc <= fx + ARMIJO_C * step * slope {
                    break (cand, fc, gc);
                }
                step *= 0.5;
                if step < 1e-20 {
                    return Err(ClassifierError::Convergence {
                        iterations,
                        grad_norm: norm(&g),
                        loss: fx,
                    });
                }
            };
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if history.len() == HISTORY {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }
            x = x_new;
            fx = f_new;
            g = g_new;
            losses.push(fx);
        }
        let grad_norm = norm(&g);
        let n_features = objective.n_features();
        Ok((
            Self {
                n_classes,
                n_features,
                params: x,
            },
            FitTrace {
                iterations,
                grad_norm,
                losses,
            },
        ))
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let f = self.n_features;
        let bias = &self.params[self.n_classes * f..];
        let mut z: Vec<f64> = (0..self.n_classes)
            .map(|c| dot(&self.params[c * f..(c + 1) * f], row) + bias[c])
            .collect();
        softmax_in_place(&mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            vec![
                vec![0.5, -1.0, 2.0],
                vec![1.5, 0.3, -0.7],
                vec![-0.2, 0.8, 0.1],
                vec![2.2, -1.4, 0.9],
                vec![-1.1, 0.05, -0.3],
            ],
            vec![0, 1, 2, 1, 0],
        )
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (rows, labels) = toy();
        let obj = LogisticObjective {
            rows: &rows,
            labels: &labels,
            n_classes: 3,
            l2: 0.3,
        };
        let params: Vec<f64> = (0..obj.n_params()).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1).collect();
        let (_, grad) = obj.loss_and_grad(&params);
        let h = 1e-6;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let up = obj.loss(&p);
            p[i] -= 2.0 * h;
            let down = obj.loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn converges_with_monotone_loss() {
        let (rows, labels) = toy();
        let (model, trace) = Logistic::fit(&rows, &labels, 3, 0.1, 1000).unwrap();
        assert!(trace.grad_norm < GRAD_TOL);
        assert!(trace.losses.windows(2).all(|w| w[1] <= w[0]));
        let p = model.predict_proba(&rows[0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_penalty_keeps_probabilities_inside() {
        let rows = vec![vec![-3.0], vec![-2.0], vec![2.0], vec![3.0]];
        let labels = vec![0, 0, 1, 1];
        let (model, _) = Logistic::fit(&rows, &labels, 2, 1.0, 1000).unwrap();
        for r in &rows {
            for p in model.predict_proba(r) {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_convergence_error() {
        let (rows, labels) = toy();
        let err = Logistic::fit(&rows, &labels, 3, 1e-3, 2).unwrap_err();
        assert!(matches!(err, ClassifierError::Convergence { iterations: 2, .. }));
    }
}
