//! Confusion-matrix metrics and stratified k-fold indices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Confusion matrix (rows: true class, columns: predicted class) with
/// accuracy and macro-averaged precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Derives every metric from a square confusion matrix. A class with no
    /// predictions (or no true samples) scores 0 for the undefined quantity.
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::Argument(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Argument("confusion matrix is empty".into()));
        }
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
                let actual: u64 = confusion[c].iter().sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, actual);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: actual,
                }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        Ok(Self {
            accuracy: trace as f64 / total as f64,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            per_class,
            confusion,
        })
    }

    /// Plain-text confusion matrix with a header row.
    pub fn confusion_table(&self, class_names: &[&str]) -> String {
        let k = self.confusion.len();
        let name = |i: usize| {
            class_names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| i.to_string())
        };
        let width = (0..k).map(|i| name(i).len()).max().unwrap_or(1).max(8);
        let mut out = format!("{:>width$}", "true\\pred");
        for j in 0..k {
            out.push_str(&format!(" {:>width$}", name(j)));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&format!("{:>width$}", name(i)));
            for v in row {
                out.push_str(&format!(" {v:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Scores predictions against ground truth over `n_classes` classes.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<EvalReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "y_true has {} labels but y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Argument("cannot evaluate zero predictions".into()));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (t, p) in y_true.iter().zip(y_pred) {
        if *t >= n_classes || *p >= n_classes {
            return Err(Error::Argument(format!(
                "label out of range 0..{n_classes}"
            )));
        }
        confusion[*t][*p] += 1;
    }
    EvalReport::from_confusion(confusion)
}

/// Stratified k-fold `(train, test)` index pairs.
///
/// Each class is shuffled and dealt round-robin into the folds, so every
/// fold holds `floor` or `ceil` of `n_c / k` samples of class `c`.
pub fn kfold_indices(
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::Argument(format!(
                "class {c} has {} samples, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|i| fold_of[*i] == f);
            (train, test)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1, 0];
        let r = evaluate(&y, &y, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(
            (r.macro_precision, r.macro_recall, r.macro_f1),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn hand_computed_fixture() {
        let r =
            EvalReport::from_confusion(vec![vec![5, 0, 0], vec![0, 0, 5], vec![0, 0, 5]]).unwrap();
        assert!((r.accuracy - 10.0 / 15.0).abs() < 1e-12);
        assert!((r.macro_precision - 0.5).abs() < 1e-12);
        assert!((r.macro_recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - (1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class[1].recall, 0.0);
    }

    #[test]
    fn constant_prediction_on_balanced_truth() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let r = evaluate(&y_true, &[1; 6], 3).unwrap();
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_scores_zero() {
        let r = evaluate(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(
            r.per_class[2],
            ClassMetrics {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                support: 0
            }
        );
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(evaluate(&[0, 1], &[0], 3).is_err());
    }

    #[test]
    fn balanced_folds() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let folds = kfold_indices(&labels, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = [0; 10];
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|i| labels[**i] == 0).count(), 1);
            assert_eq!(train.len() + test.len(), 10);
            test.iter().for_each(|i| seen[*i] += 1);
        }
        assert!(seen.iter().all(|c| *c == 1));
        assert_eq!(folds, kfold_indices(&labels, 5, 3).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        assert!(kfold_indices(&[0, 0, 0, 1], 2, 0).is_err());
        assert!(kfold_indices(&[0, 1], 1, 0).is_err());
    }

    #[test]
    fn confusion_table_layout() {
        let r = EvalReport::from_confusion(vec![vec![1, 0], vec![2, 3]]).unwrap();
        let t = r.confusion_table(&["a", "b"]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(2).unwrap().trim_end().ends_with('3'));
    }
}
