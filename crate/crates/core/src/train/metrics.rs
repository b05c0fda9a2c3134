use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::ingest::Label;
use crate::tensor::Matrix;

/// Confusion counts with bot as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Bot, Label::Bot) => self.tp += 1,
            (Label::Human, Label::Human) => self.tn += 1,
            (Label::Human, Label::Bot) => self.fp += 1,
            (Label::Bot, Label::Human) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(self) -> Metrics {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let total = self.total();
        let accuracy = if total == 0 { 0.0 } else { (tp + tn) / total as f64 };
        let precision = if self.tp + self.fp == 0 { 0.0 } else { tp / (tp + fp) };
        let recall = if self.tp + self.fn_ == 0 { 0.0 } else { tp / (tp + fn_) };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        let mcc = if factors.contains(&0.0) {
            0.0
        } else {
            let m = (tp * tn - fp * fn_) / factors.iter().product::<f64>().sqrt();
            m.clamp(-1.0, 1.0)
        };
        Metrics {
            accuracy,
            f1,
            mcc,
            confusion: self,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
    pub confusion: Confusion,
}

/// Argmax class per row; a tie goes to human.
pub fn predict_labels(probs: &Matrix) -> Vec<Label> {
    probs
        .argmax_rows()
        .into_iter()
        .map(|c| if c == 1 { Label::Bot } else { Label::Human })
        .collect()
}

/// Metrics of `predictions` against `labels` on the users under `mask`.
pub fn score(predictions: &[Label], labels: &[Option<Label>], mask: &[bool]) -> Result<Metrics, TrainError> {
    let mut c = Confusion::default();
    for (i, (&m, (&p, &l))) in mask.iter().zip(predictions.iter().zip(labels)).enumerate() {
        if !m {
            continue;
        }
        let truth = l.ok_or(TrainError::Unlabeled(i))?;
        c.record(truth, p);
    }
    if c.total() == 0 {
        return Err(TrainError::EmptyMask("evaluation"));
    }
    Ok(c.metrics())
}

/// Scores the argmax of an n×2 probability matrix.
pub fn evaluate(probs: &Matrix, labels: &[Option<Label>], mask: &[bool]) -> Result<Metrics, TrainError> {
    if probs.cols() != 2 || probs.rows() != labels.len() || mask.len() != labels.len() {
        return Err(TrainError::Config(format!(
            "evaluate: probs {:?}, {} labels, mask of {}",
            probs.shape(),
            labels.len(),
            mask.len()
        )));
    }
    score(&predict_labels(probs), labels, mask)
}
