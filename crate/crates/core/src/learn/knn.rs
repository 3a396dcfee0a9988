//! k-nearest-neighbor classification by exhaustive scan.

use super::{Label, LabeledDataset, LearnError};

/// Majority label of the k nearest training rows by Euclidean distance.
/// Distance ties break toward the lower row index; a vote tie (impossible
/// for odd k with binary labels) would go to malware.
pub fn knn_predict(train: &LabeledDataset, x: &[f64], k: usize) -> Result<Label, LearnError> {
    if train.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if train.len() < k || k == 0 {
        return Err(LearnError::TooFewRows { k, n: train.len() });
    }
    if x.len() != train.dim() {
        return Err(LearnError::Dimension {
            expected: train.dim(),
            got: x.len(),
        });
    }

    // Insertion into a k-sized ordered buffer of (squared distance, index);
    // squared distance preserves the Euclidean ordering and its ties.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, row) in train.x.iter().enumerate() {
        let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let key = (d2, i);
        if best.len() == k {
            let worst = *best.last().unwrap();
            if (key.0, key.1) >= (worst.0, worst.1) {
                continue;
            }
        }
        let pos = best.partition_point(|&(bd, bi)| (bd, bi) < (d2, i));
        best.insert(pos, key);
        if best.len() > k {
            best.pop();
        }
    }

    let malware = best.iter().filter(|&&(_, i)| train.y[i].is_malware()).count();
    Ok(if 2 * malware >= k { Label::Malware } else { Label::Benign })
}
