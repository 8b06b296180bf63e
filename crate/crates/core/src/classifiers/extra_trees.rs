//! Extremely randomized trees with the entropy criterion.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        proba: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

fn entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    max_features: usize,
    rng: Rng,
    /// Feature order, partially reshuffled at every node.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, members: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in members {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn make_leaf(&self, counts: &[usize], total: usize) -> Node {
        Node::Leaf {
            proba: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        }
    }

    fn build(&mut self, members: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&members);
        let total = members.len();
        self.nodes.push(self.make_leaf(&counts, total));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || total < 2 {
            return id;
        }
        let parent_entropy = entropy(&counts, total);

        // Visit features in random order until `max_features` non-constant
        // ones have been tried or the features run out.
        let n_features = self.order.len();
        let mut tried = 0;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left_counts = vec![0usize; self.n_classes];
        for pos in 0..n_features {
            if tried == self.max_features {
                break;
            }
            let swap = self.rng.random_range(pos..n_features);
            self.order.swap(pos, swap);
            let f = self.order[pos];
            let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.rows[i][f];
                (lo.min(v), hi.max(v))
            });
            if lo >= hi {
                continue;
            }
            tried += 1;
            let u: f64 = self.rng.random();
            let mut threshold = lo + u * (hi - lo);
            if threshold >= hi {
                threshold = lo;
            }
            left_counts.iter_mut().for_each(|c| *c = 0);
            let mut n_left = 0;
            for &i in &members {
                if self.rows[i][f] <= threshold {
                    left_counts[self.labels[i]] += 1;
                    n_left += 1;
                }
            }
            let right_counts: Vec<usize> = counts.iter().zip(&left_counts).map(|(a, b)| a - b).collect();
            let n_right = total - n_left;
            let child = (n_left as f64 * entropy(&left_counts, n_left)
                + n_right as f64 * entropy(&right_counts, n_right))
                / total as f64;
            let gain = parent_entropy - child;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, threshold));
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            members.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.build(l);
        let right = self.build(r);
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
pub struct ExtraTrees {
    trees: Vec<Tree>,
    n_classes: usize,
    n_features: usize,
}

impl ExtraTrees {
    /// `labels` are class indices in `0..n_classes`. `max_features` is the
    /// fraction of features tried per split (at least one).
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        n_trees: usize,
        max_features: f64,
        seed: u64,
    ) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        let k = ((max_features * n_features as f64).round() as usize).clamp(1, n_features.max(1));
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut b = Builder {
                    rows,
                    labels,
                    n_classes,
                    max_features: k,
                    rng: rng_from_seed(derive_seed(seed, t as u64)),
                    order: (0..n_features).collect(),
                    nodes: Vec::new(),
                };
                b.build((0..rows.len()).collect());
                Tree { nodes: b.nodes }
            })
            .collect();
        Self {
            trees,
            n_classes,
            n_features,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of per-tree leaf class frequencies.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf(row)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}
