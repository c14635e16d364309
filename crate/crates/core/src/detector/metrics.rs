use serde::{Deserialize, Serialize};

use crate::corpus::Variant;
use crate::error::{Error, Result};

/// Per-class F1 indexed like [`Variant::index`], plus the confusion matrix
/// (rows = truth, columns = prediction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub combination: String,
    pub f1: [f64; 3],
    pub macro_f1: f64,
    pub confusion: [[usize; 3]; 3],
    /// Classes missing from both truth and prediction.
    pub absent: Vec<Variant>,
}

impl EvalResult {
    pub fn f1_of(&self, v: Variant) -> f64 {
        self.f1[v.index()]
    }

    pub fn support(&self, v: Variant) -> usize {
        self.confusion[v.index()].iter().sum()
    }
}

pub fn macro_f1(y_true: &[Variant], y_pred: &[Variant]) -> Result<EvalResult> {
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("no labels to evaluate".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut confusion = [[0usize; 3]; 3];
    for (t, p) in y_true.iter().zip(y_pred) {
        confusion[t.index()][p.index()] += 1;
    }
    let mut f1 = [0.0; 3];
    let mut absent = Vec::new();
    for c in 0..3 {
        let tp = confusion[c][c] as f64;
        let actual: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|r| r[c]).sum();
        if actual == 0 && predicted == 0 {
            absent.push(Variant::from_index(c).expect("class index"));
        }
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        f1[c] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    Ok(EvalResult {
        combination: String::new(),
        f1,
        macro_f1: f1.iter().sum::<f64>() / 3.0,
        confusion,
        absent,
    })
}
