//! One-hidden-layer perceptron: tanh hidden units, softmax output,
//! cross-entropy with an L2 penalty, trained by mini-batch Adam.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, parse_value, softmax_rows, HyperParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    /// L2 penalty, scaled by the batch size.
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops after `n_iter_no_change` epochs whose loss did not
    /// improve on the best loss by at least `tol`.
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 128,
            alpha: 1e-3,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            tol: 1e-4,
            n_iter_no_change: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl HyperParams for MlpParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "hidden" | "hidden_layer_sizes" => {
                self.hidden = parse_value(
                    key,
                    value.trim_matches(|c| c == '(' || c == ')' || c == ','),
                )?
            }
            "alpha" => self.alpha = parse_value(key, value)?,
            "learning_rate" | "learning_rate_init" => self.learning_rate = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "max_epochs" | "max_iter" => self.max_epochs = parse_value(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            "n_iter_no_change" => self.n_iter_no_change = parse_value(key, value)?,
            "beta1" | "beta_1" => self.beta1 = parse_value(key, value)?,
            "beta2" | "beta_2" => self.beta2 = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            _ => {
                return Err(Error::Argument(format!(
                    "unknown MLP hyperparameter '{key}'"
                )))
            }
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Argument(
                "MLP needs hidden >= 1 and batch_size >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Gradients with the same shapes as the model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpGradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub epochs_run: usize,
    pub final_loss: f64,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> (Array2<f64>, Array1<f64>) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
    let b = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
    (w, b)
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl MlpModel {
    /// Randomly initialised, untrained network.
    pub fn initialize(
        params: MlpParams,
        n_features: usize,
        n_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (w1, b1) = glorot(rng, n_features, params.hidden);
        let (w2, b2) = glorot(rng, params.hidden, n_classes);
        Self {
            params,
            w1,
            b1,
            w2,
            b2,
            epochs_run: 0,
            final_loss: f64::NAN,
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_parameters(), "parameter vector length");
        let mut it = flat.iter().copied();
        for target in [
            self.w1.iter_mut().collect::<Vec<_>>(),
            self.b1.iter_mut().collect(),
            self.w2.iter_mut().collect(),
            self.b2.iter_mut().collect(),
        ] {
            for v in target {
                *v = it.next().expect("length checked");
            }
        }
    }

    fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a1 = x.dot(&self.w1);
        a1 += &self.b1;
        a1.mapv_inplace(f64::tanh);
        a1
    }

    /// Row-wise class probabilities; each row sums to one.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z2 = self.hidden(x).dot(&self.w2);
        z2 += &self.b2;
        softmax_rows(&mut z2);
        z2
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.predict_proba(x)
            .rows()
            .into_iter()
            .map(|r| argmax_lowest(&r.to_vec()))
            .collect()
    }

    /// Penalised mean cross-entropy on `(x, y)` and its gradients.
    pub fn loss_and_gradients(&self, x: &Array2<f64>, y: &[usize]) -> (f64, MlpGradients) {
        let n = x.nrows() as f64;
        let a1 = self.hidden(x);
        let mut z2 = a1.dot(&self.w2);
        z2 += &self.b2;
        let picked: Vec<f64> = y.iter().enumerate().map(|(i, &c)| z2[[i, c]]).collect();
        let lse = softmax_rows(&mut z2);
        let mut loss: f64 = lse.iter().zip(&picked).map(|(l, p)| l - p).sum::<f64>() / n;
        let squares = self
            .w1
            .iter()
            .chain(self.w2.iter())
            .map(|v| v * v)
            .sum::<f64>();
        loss += self.params.alpha * squares / (2.0 * n);

        let mut delta2 = z2;
        for (i, &c) in y.iter().enumerate() {
            delta2[[i, c]] -= 1.0;
        }
        delta2 /= n;
        let mut w2 = a1.t().dot(&delta2);
        w2.scaled_add(self.params.alpha / n, &self.w2);
        let b2 = delta2.sum_axis(Axis(0));
        let mut delta1 = delta2.dot(&self.w2.t());
        delta1.zip_mut_with(&a1, |d, a| *d *= 1.0 - a * a);
        let mut w1 = x.t().dot(&delta1);
        w1.scaled_add(self.params.alpha / n, &self.w1);
        let b1 = delta1.sum_axis(Axis(0));
        (loss, MlpGradients { w1, b1, w2, b2 })
    }

    fn adam_step(&mut self, grads: &MlpGradients, state: &mut AdamState) {
        let p = &self.params;
        state.t += 1;
        let lr =
            p.learning_rate * (1.0 - p.beta2.powi(state.t)).sqrt() / (1.0 - p.beta1.powi(state.t));
        let g = grads.flatten();
        let mut theta = self.parameters();
        for i in 0..theta.len() {
            state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g[i];
            state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * g[i] * g[i];
            theta[i] -= lr * state.m[i] / (state.v[i].sqrt() + p.epsilon);
        }
        self.set_parameters(&theta);
    }

    /// Trains from a seeded initialisation; batches are reshuffled every epoch.
    pub fn fit(
        params: MlpParams,
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::initialize(params, x.ncols(), n_classes, &mut rng);
        let n_params = model.n_parameters();
        let mut state = AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        };
        let n = x.nrows();
        let batch = model.params.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        for epoch in 0..model.params.max_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|i| y[*i]).collect();
                let (loss, grads) = model.loss_and_gradients(&xb, &yb);
                epoch_loss += loss * chunk.len() as f64;
                model.adam_step(&grads, &mut state);
            }
            epoch_loss /= n as f64;
            model.epochs_run = epoch + 1;
            model.final_loss = epoch_loss;
            if epoch_loss > best - model.params.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale >= model.params.n_iter_no_change {
                break;
            }
        }
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpModel::initialize(
            MlpParams {
                hidden: 7,
                ..Default::default()
            },
            4,
            3,
            &mut rng,
        );
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - 2.0) * (j as f64 + 0.5));
        for row in m.predict_proba(&x).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = MlpModel::initialize(
            MlpParams {
                hidden: 3,
                ..Default::default()
            },
            2,
            2,
            &mut rng,
        );
        let mut flat = m.parameters();
        flat[0] = 42.0;
        m.set_parameters(&flat);
        assert_eq!(m.w1[[0, 0]], 42.0);
        assert_eq!(m.parameters(), flat);
    }

    #[test]
    fn learns_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let params = MlpParams {
            hidden: 8,
            alpha: 0.0,
            learning_rate: 0.05,
            batch_size: 4,
            max_epochs: 2000,
            n_iter_no_change: 2000,
            ..Default::default()
        };
        let m = MlpModel::fit(params, &x, &y, 2, 0);
        assert_eq!(m.predict(&x), y.to_vec());
    }
}
