//! Z-scored numerical and one-hot categorical property encodings.

use super::users::{UserRecord, NUMERIC_COLUMNS};
use super::{IngestError, SplitMasks};
use crate::tensor::Matrix;

/// Columns whose train std is at or below this are encoded as all zeros.
pub const ZERO_VARIANCE_EPS: f64 = 1e-8;

/// Train-split mean and population standard deviation per numerical column.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericStats {
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

pub fn compute_numeric_stats(
    records: &[UserRecord],
    masks: &SplitMasks,
) -> Result<NumericStats, IngestError> {
    if masks.train_count() == 0 {
        return Err(IngestError::EmptyTrainSplit);
    }
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for col in 0..6 {
        let values: Vec<f64> = records
            .iter()
            .zip(masks.train())
            .filter(|(_, &t)| t)
            .filter_map(|(r, _)| r.numerical[col])
            .collect();
        if values.is_empty() {
            return Err(IngestError::NoTrainValues {
                column: NUMERIC_COLUMNS[col],
            });
        }
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        mean[col] = mu;
        std[col] = var.sqrt();
    }
    Ok(NumericStats { mean, std })
}

/// n×6 matrix of `(x − mean)/std`; absent values and zero-variance columns give 0.
pub fn encode_numerical(records: &[UserRecord], stats: &NumericStats) -> Matrix {
    let mut out = Matrix::zeros(records.len(), 6);
    for (i, r) in records.iter().enumerate() {
        for col in 0..6 {
            if let Some(x) = r.numerical[col] {
                if stats.std[col] > ZERO_VARIANCE_EPS {
                    out.set(i, col, (x - stats.mean[col]) / stats.std[col]);
                }
            }
        }
    }
    out
}

/// n×22 matrix: each property becomes `[is_true, is_false]`, absent → `[0, 0]`.
pub fn encode_categorical(records: &[UserRecord]) -> Matrix {
    let mut out = Matrix::zeros(records.len(), 22);
    for (i, r) in records.iter().enumerate() {
        for (k, v) in r.categorical.iter().enumerate() {
            match v {
                Some(true) => out.set(i, 2 * k, 1.0),
                Some(false) => out.set(i, 2 * k + 1, 1.0),
                None => {}
            }
        }
    }
    out
}
