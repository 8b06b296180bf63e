//! Isolation forest over feature rows.
//!
//! Each tree draws its generator from `derive_seed(seed, tree_index)`, then
//! consumes it in a fixed order: the subsample (`rand::seq::index::sample`),
//! then depth-first, left subtree first, feature draws followed by one uniform
//! `f64` placing the split in `[min, max)`. Rows with `value < split` go left.
//! A feature draw is a uniform index into the untried features, kept as
//! `0..n` with each constant pick swapped to the end; draws repeat until a
//! feature varies over the node, and a node where none varies is a leaf.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::rng::{derive_seed, rng_from_seed, Rng};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn path_length(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    n_features: usize,
    max_depth: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, members: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: members.len() });
        if depth >= self.max_depth || members.len() <= 1 {
            return id;
        }
        // Draw features without replacement until one varies over the node.
        let mut pool: Option<Vec<usize>> = None;
        let mut remaining = self.n_features;
        let (feature, lo, hi) = loop {
            if remaining == 0 {
                return id;
            }
            let j = self.rng.random_range(0..remaining);
            let f = pool.as_ref().map_or(j, |p| p[j]);
            let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.rows[i][f];
                (lo.min(v), hi.max(v))
            });
            if lo < hi {
                break (f, lo, hi);
            }
            let p = pool.get_or_insert_with(|| (0..self.n_features).collect());
            p.swap(j, remaining - 1);
            remaining -= 1;
        };
        let u: f64 = self.rng.random();
        let threshold = lo + u * (hi - lo);
        let (l, r): (Vec<usize>, Vec<usize>) =
            members.into_iter().partition(|&i| self.rows[i][feature] < threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<Tree>,
    subsample: usize,
    n_features: usize,
}

impl IsolationForest {
    /// `subsample = None` uses `min(256, n)`.
    pub fn fit(rows: &[Vec<f64>], n_trees: usize, subsample: Option<usize>, seed: u64) -> Result<Self, DetectorError> {
        if rows.len() < 2 {
            return Err(DetectorError::TooFewSamples {
                needed: 2,
                found: rows.len(),
            });
        }
        if n_trees == 0 {
            return Err(DetectorError::InvalidConfig("n_trees must be >= 1".into()));
        }
        let n_features = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n_features) {
            return Err(DetectorError::ShapeMismatch {
                expected: (n_features, 1),
                found: (rows[bad].len(), 1),
            });
        }
        let subsample = subsample.unwrap_or(256).clamp(2, rows.len());
        let max_depth = (subsample as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, t as u64));
                let members = sample_indices(&mut rng, rows.len(), subsample).into_vec();
                let mut b = Builder {
                    rows,
                    n_features,
                    max_depth,
                    rng,
                    nodes: Vec::new(),
                };
                b.build(members, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self {
            trees,
            subsample,
            n_features,
        })
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn mean_path_length(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(subsample))`, in `(0, 1)`.
    pub fn score(&self, row: &[f64]) -> Result<f64, DetectorError> {
        if row.len() != self.n_features {
            return Err(DetectorError::ShapeMismatch {
                expected: (self.n_features, 1),
                found: (row.len(), 1),
            });
        }
        Ok(2f64.powf(-self.mean_path_length(row) / average_path_length(self.subsample)))
    }
}
