use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    pub n: usize,
}

/// Single-label multi-class F1 scores. Classes that never occur in either
/// `pred` or `truth` count as F1 = 0 in the macro average.
pub fn classification_metrics(
    pred: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<Metrics> {
    if pred.is_empty() {
        return Err(Error::Data("cannot score an empty split".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::shape(
            "classification_metrics",
            (pred.len(), 1),
            (truth.len(), 1),
        ));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &y) in pred.iter().zip(truth) {
        if p >= n_classes || y >= n_classes {
            return Err(Error::LabelRange {
                ty: "<metrics>".into(),
                label: p.max(y),
                classes: n_classes,
            });
        }
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let d = 2 * tp + fp + fn_;
        if d == 0 {
            0.0
        } else {
            2.0 * tp as f64 / d as f64
        }
    };
    let per_class_f1: Vec<f64> = (0..n_classes).map(|c| f1(tp[c], fp[c], fn_[c])).collect();
    let (tp_all, fp_all, fn_all) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let accuracy = tp_all as f64 / pred.len() as f64;
    Ok(Metrics {
        micro_f1: f1(tp_all, fp_all, fn_all),
        macro_f1: per_class_f1.iter().sum::<f64>() / n_classes.max(1) as f64,
        accuracy,
        per_class_f1,
        n: pred.len(),
    })
}
