//! Post-projection classification: brute-force 1-NN and nearest-centroid,
//! plus the accuracy metric used for reporting.

use rayon::prelude::*;

use crate::densela::Matrix;
use crate::error::{Error, Result};
use crate::scatter::{class_stats, LabeledDataset};

/// Predicted label per query sample, plus the index of the deciding
/// reference column (-1 for the centroid method).
#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub reference_index: Vec<i64>,
}

/// Labels each query column with the label of its Euclidean-nearest
/// reference column. Distance ties go to the lowest reference index.
pub fn predict_1nn(refs: &Matrix, ref_labels: &[usize], query: &Matrix) -> Result<Prediction> {
    if refs.cols() == 0 {
        return Err(Error::EmptyReference);
    }
    if refs.rows() != query.rows() {
        return Err(Error::DimensionMismatch {
            expected: (refs.rows(), query.cols()),
            got: query.shape(),
        });
    }
    if ref_labels.len() != refs.cols() {
        return Err(Error::LengthMismatch {
            left: ref_labels.len(),
            right: refs.cols(),
        });
    }
    let d = refs.rows();
    let picks: Vec<usize> = (0..query.cols())
        .into_par_iter()
        .map(|q| {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for r in 0..refs.cols() {
                let mut dist = 0.0;
                for i in 0..d {
                    let diff = query[(i, q)] - refs[(i, r)];
                    dist += diff * diff;
                }
                if dist < best_dist {
                    best_dist = dist;
                    best = r;
                }
            }
            best
        })
        .collect();
    Ok(Prediction {
        labels: picks.iter().map(|&r| ref_labels[r]).collect(),
        reference_index: picks.iter().map(|&r| r as i64).collect(),
    })
}

/// Labels each query column with the class of its nearest class centroid.
pub fn predict_centroid(refs: &Matrix, ref_labels: &[usize], query: &Matrix) -> Result<Prediction> {
    if refs.cols() == 0 {
        return Err(Error::EmptyReference);
    }
    if refs.rows() != query.rows() {
        return Err(Error::DimensionMismatch {
            expected: (refs.rows(), query.cols()),
            got: query.shape(),
        });
    }
    if ref_labels.len() != refs.cols() {
        return Err(Error::LengthMismatch {
            left: ref_labels.len(),
            right: refs.cols(),
        });
    }
    let ref_data = LabeledDataset::new("centroid-refs", refs.clone(), Some(ref_labels.to_vec()))?;
    let stats = class_stats(&ref_data)?;
    let centroids = Matrix::from_columns(&stats.class_means);
    let pred = predict_1nn(
        &centroids,
        &(1..=stats.num_classes()).collect::<Vec<_>>(),
        query,
    )?;
    Ok(Prediction {
        labels: pred.labels,
        reference_index: vec![-1; query.cols()],
    })
}

/// Recognition accuracy in percent: `100 * matches / N`.
pub fn accuracy(pred: &Prediction, truth: &[usize]) -> Result<f64> {
    if pred.labels.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.labels.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let matches = pred
        .labels
        .iter()
        .zip(truth)
        .filter(|(a, b)| a == b)
        .count();
    Ok(100.0 * matches as f64 / truth.len() as f64)
}
