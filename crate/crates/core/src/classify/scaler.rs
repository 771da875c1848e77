use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// Per-column z-score parameters learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Population mean/std per column. Zero-variance columns get mean 0
    /// and scale 1, so they pass through unchanged.
    pub fn fit(train: &Array2<f64>) -> Self {
        let n = train.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(train.ncols());
        let mut scale = Vec::with_capacity(train.ncols());
        for col in train.axis_iter(Axis(1)) {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= 1e-12 * (1.0 + m.abs()) {
                mean.push(0.0);
                scale.push(1.0);
            } else {
                mean.push(m);
                scale.push(std);
            }
        }
        Self { mean, scale }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

/// Fits on `train` and returns `apply_to` transformed with those statistics.
pub fn standardize(train: &Array2<f64>, apply_to: &Array2<f64>) -> (Array2<f64>, Scaler) {
    let scaler = Scaler::fit(train);
    (scaler.transform(apply_to), scaler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_column_unchanged() {
        let train = array![[5.0, 1.0], [5.0, 3.0]];
        let (out, s) = standardize(&train, &train);
        assert_eq!(out.column(0).to_vec(), vec![5.0, 5.0]);
        assert_eq!(s.scale[0], 1.0);
    }

    #[test]
    fn z_score_definition() {
        // mean 10, population std 2
        let train = array![[8.0], [12.0]];
        let (out, _) = standardize(&train, &array![[12.0], [10.0]]);
        assert_eq!(out.column(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn test_statistics_differ_from_unit() {
        let train = array![[0.0], [1.0], [2.0], [3.0]];
        let test = array![[10.0], [14.0]];
        let (out, _) = standardize(&train, &test);
        let mean = out.column(0).sum() / 2.0;
        assert!(mean.abs() > 1.0);
    }
}
