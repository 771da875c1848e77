use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, parse_value, HyperParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weights: Weighting,
    /// Minkowski exponent.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 17,
            weights: Weighting::Distance,
            p: 2.0,
        }
    }
}

impl HyperParams for KnnParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" | "n_neighbors" => self.k = parse_value(key, value)?,
            "p" => self.p = parse_value(key, value)?,
            "weights" => {
                self.weights = match value {
                    "uniform" => Weighting::Uniform,
                    "distance" => Weighting::Distance,
                    _ => {
                        return Err(Error::Argument(format!(
                            "weights must be uniform or distance, got '{value}'"
                        )))
                    }
                }
            }
            _ => {
                return Err(Error::Argument(format!(
                    "unknown KNN hyperparameter '{key}'"
                )))
            }
        }
        if self.k == 0 || self.p < 1.0 {
            return Err(Error::Argument("KNN needs k >= 1 and p >= 1".into()));
        }
        Ok(())
    }
}

/// Brute-force k-nearest-neighbour classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub n_classes: usize,
}

impl KnnModel {
    pub fn fit(params: KnnParams, x: &Array2<f64>, y: &[usize], n_classes: usize) -> Self {
        Self {
            params,
            train_x: x.clone(),
            train_y: y.to_vec(),
            n_classes,
        }
    }

    fn distance(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        let p = self.params.p;
        if p == 2.0 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        } else if p == 1.0 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
        } else {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }

    /// Class votes for one query row.
    pub fn votes(&self, row: ArrayView1<f64>) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .train_x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (self.distance(row, r), i))
            .collect();
        let k = self.params.k.min(dist.len());
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_dist);
        }
        let neighbours = &mut dist[..k];
        neighbours.sort_unstable_by(by_dist);
        let mut votes = vec![0.0; self.n_classes];
        match self.params.weights {
            Weighting::Uniform => neighbours
                .iter()
                .for_each(|(_, i)| votes[self.train_y[*i]] += 1.0),
            Weighting::Distance => {
                if neighbours.iter().any(|(d, _)| *d == 0.0) {
                    // exact matches outvote everything else
                    neighbours
                        .iter()
                        .filter(|(d, _)| *d == 0.0)
                        .for_each(|(_, i)| votes[self.train_y[*i]] += 1.0);
                } else {
                    neighbours
                        .iter()
                        .for_each(|(d, i)| votes[self.train_y[*i]] += 1.0 / d);
                }
            }
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
