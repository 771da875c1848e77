//! Multinomial (softmax) logistic regression with an L2 penalty.
//!
//! The objective, averaged over the `n` training rows, is
//! `-(1/n) sum log p(y_i | x_i) + ||W||^2 / (2 C n)`; the intercepts are not
//! penalised. Parameters are packed as `W` (row-major, features x classes)
//! followed by the per-class intercepts.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::optim::{minimize, LbfgsOptions};
use super::{argmax_lowest, parse_value, softmax_rows, HyperParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    /// Gradient infinity-norm at which optimisation stops.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

impl HyperParams for LogisticParams {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "c" | "C" => self.c = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            _ => {
                return Err(Error::Argument(format!(
                    "unknown LR hyperparameter '{key}'"
                )))
            }
        }
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::Argument("LR needs C > 0".into()));
        }
        Ok(())
    }
}

fn unpack(theta: &[f64], n_features: usize, n_classes: usize) -> (ArrayView2<'_, f64>, &[f64]) {
    let (w, b) = theta.split_at(n_features * n_classes);
    (
        ArrayView2::from_shape((n_features, n_classes), w).expect("packed weight shape"),
        b,
    )
}

/// Value and gradient of the regularised cross-entropy at `theta`.
pub fn logistic_objective(
    theta: &[f64],
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    c: f64,
) -> (f64, Vec<f64>) {
    let (n, d) = x.dim();
    let nf = n as f64;
    let (w, b) = unpack(theta, d, n_classes);
    let mut logits = x.dot(&w);
    logits += &ArrayView2::from_shape((1, n_classes), b).expect("bias shape");
    let picked: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| logits[[i, yi]])
        .collect();
    let lse = softmax_rows(&mut logits);
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        loss += lse[i] - picked[i];
        logits[[i, yi]] -= 1.0;
    }
    // logits now holds P - Y
    let penalty = w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c * nf);
    loss = loss / nf + penalty;
    let mut grad_w = x.t().dot(&logits) / nf;
    grad_w.scaled_add(1.0 / (c * nf), &w);
    let grad_b = logits.sum_axis(Axis(0)) / nf;
    let mut grad = grad_w.into_raw_vec_and_offset().0;
    grad.extend(grad_b.iter());
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub params: LogisticParams,
    pub n_features: usize,
    pub n_classes: usize,
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn fit(params: LogisticParams, x: &Array2<f64>, y: &[usize], n_classes: usize) -> Self {
        let d = x.ncols();
        let theta0 = vec![0.0; (d + 1) * n_classes];
        let options = LbfgsOptions {
            max_iter: params.max_iter,
            tol: params.tol,
            history: 10,
        };
        let result = minimize(
            |t| logistic_objective(t, x, y, n_classes, params.c),
            theta0,
            &options,
        );
        Self {
            params,
            n_features: d,
            n_classes,
            theta: result.x,
            iterations: result.iterations,
            converged: result.converged,
        }
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let (w, b) = unpack(&self.theta, self.n_features, self.n_classes);
        let mut logits = x.dot(&w);
        logits += &Array1::from(b.to_vec());
        softmax_rows(&mut logits);
        logits
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        let proba = self.predict_proba(x);
        proba
            .rows()
            .into_iter()
            .map(|r| argmax_lowest(&r.to_vec()))
            .collect()
    }
}
