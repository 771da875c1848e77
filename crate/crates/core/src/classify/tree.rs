//! CART classification trees and the two bagged ensembles built from them:
//! random forest (best split over a random feature subset) and extra trees
//! (random threshold per candidate feature).

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, parse_value, HyperParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|c| (*c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => counts
                .iter()
                .filter(|c| **c > 0)
                .map(|c| {
                    let p = *c as f64 / n;
                    -p * p.log2()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitter {
    /// Exhaustive threshold search (random forest).
    Best,
    /// One uniform random threshold per candidate feature (extra trees).
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl ForestParams {
    /// Random forest: gini, depth 15, 300 trees.
    pub fn random_forest() -> Self {
        Self {
            n_trees: 300,
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: Some(15),
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }

    /// Extra trees: entropy, depth 35, 180 trees, bootstrap, min split 3.
    pub fn extra_trees() -> Self {
        Self {
            n_trees: 180,
            criterion: Criterion::Entropy,
            splitter: Splitter::Random,
            max_depth: Some(35),
            min_samples_split: 3,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl HyperParams for ForestParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_trees" | "n_estimators" => self.n_trees = parse_value(key, value)?,
            "criterion" => {
                self.criterion = match value {
                    "gini" => Criterion::Gini,
                    "entropy" => Criterion::Entropy,
                    _ => {
                        return Err(Error::Argument(format!(
                            "criterion must be gini or entropy, got '{value}'"
                        )))
                    }
                }
            }
            "max_depth" => {
                self.max_depth = match value {
                    "none" | "None" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "min_samples_split" => self.min_samples_split = parse_value(key, value)?,
            "min_samples_leaf" => self.min_samples_leaf = parse_value(key, value)?,
            "max_features" => {
                self.max_features = match value {
                    "sqrt" => MaxFeatures::Sqrt,
                    "log2" => MaxFeatures::Log2,
                    "all" | "none" | "None" => MaxFeatures::All,
                    v => MaxFeatures::Count(parse_value(key, v)?),
                }
            }
            "bootstrap" => self.bootstrap = parse_value(key, value)?,
            _ => {
                return Err(Error::Argument(format!(
                    "unknown forest hyperparameter '{key}'"
                )))
            }
        }
        if self.n_trees == 0 || self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return Err(Error::Argument(
                "forest needs n_trees >= 1, min_samples_split >= 2, min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree; node 0 is the root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    n_classes: usize,
    params: &'a ForestParams,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        idx.iter().for_each(|i| c[self.y[*i]] += 1);
        c
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let at_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
        if pure || at_limit || idx.len() < self.params.min_samples_split {
            return self.leaf(&counts);
        }
        let Some(split) = self.find_split(idx) else {
            return self.leaf(&counts);
        };
        let mut boundary = 0;
        for k in 0..idx.len() {
            if self.x[[idx[k], split.feature]] <= split.threshold {
                idx.swap(k, boundary);
                boundary += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let (l, r) = idx.split_at_mut(boundary);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let weights: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
        self.nodes.push(Node::Leaf {
            class: argmax_lowest(&weights),
        });
        self.nodes.len() - 1
    }

    /// Visits features in random order until `max_features` non-constant
    /// ones have been evaluated.
    fn find_split(&mut self, idx: &[usize]) -> Option<SplitChoice> {
        self.features.shuffle(&mut self.rng);
        let mut best: Option<SplitChoice> = None;
        let mut evaluated = 0;
        for fi in 0..self.features.len() {
            if evaluated >= self.max_features {
                break;
            }
            let f = self.features[fi];
            let candidate = match self.params.splitter {
                Splitter::Best => self.best_threshold(idx, f),
                Splitter::Random => self.random_threshold(idx, f),
            };
            let Some(candidate) = candidate else { continue };
            evaluated += 1;
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.score < b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// `None` if the feature is constant on `idx`, `Some(None)` if no split
    /// satisfies the leaf-size constraint.
    fn best_threshold(&self, idx: &[usize], f: usize) -> Option<Option<SplitChoice>> {
        let mut order: Vec<(f64, usize)> =
            idx.iter().map(|i| (self.x[[*i, f]], self.y[*i])).collect();
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if order[0].0 >= order[order.len() - 1].0 {
            return None;
        }
        let n = order.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        order.iter().for_each(|(_, c)| right[*c] += 1);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<SplitChoice> = None;
        for k in 0..n - 1 {
            let c = order[k].1;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (order[k].0, order[k + 1].0);
            if a >= b {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let score = nl as f64 * self.params.criterion.impurity(&left, nl)
                + nr as f64 * self.params.criterion.impurity(&right, nr);
            if best.as_ref().is_none_or(|bst| score < bst.score) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid >= b { a } else { mid };
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
        Some(best)
    }

    fn random_threshold(&mut self, idx: &[usize], f: usize) -> Option<Option<SplitChoice>> {
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = self.x[[*i, f]];
                (lo.min(v), hi.max(v))
            });
        if lo >= hi {
            return None;
        }
        let mut threshold = self.rng.random_range(lo..hi);
        if threshold >= hi {
            threshold = lo;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for i in idx {
            if self.x[[*i, f]] <= threshold {
                left[self.y[*i]] += 1;
            } else {
                right[self.y[*i]] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        let nr = idx.len() - nl;
        let min_leaf = self.params.min_samples_leaf;
        if nl < min_leaf || nr < min_leaf {
            return Some(None);
        }
        let score = nl as f64 * self.params.criterion.impurity(&left, nl)
            + nr as f64 * self.params.criterion.impurity(&right, nr);
        Some(Some(SplitChoice {
            feature: f,
            threshold,
            score,
        }))
    }
}

impl DecisionTree {
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        sample: &mut [usize],
        n_classes: usize,
        params: &ForestParams,
        rng: ChaCha8Rng,
    ) -> Self {
        let mut builder = Builder {
            x,
            y,
            n_classes,
            params,
            max_features: params.max_features.resolve(x.ncols()),
            rng,
            nodes: Vec::new(),
            features: (0..x.ncols()).collect(),
        };
        builder.build(sample, 0);
        Self {
            nodes: builder.nodes,
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged ensemble with majority voting (ties go to the lowest class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl Forest {
    /// Each tree draws from its own ChaCha stream `(seed, tree_index)`, so the
    /// result does not depend on how trees are scheduled across threads.
    pub fn fit(
        params: ForestParams,
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let n = x.nrows();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, &mut sample, n_classes, &params, rng)
            })
            .collect();
        Self {
            params,
            n_classes,
            trees,
        }
    }

    pub fn votes(&self, row: ArrayView1<f64>) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1.0;
        }
        votes
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|r| argmax_lowest(&self.votes(r)))
            .collect()
    }
}
