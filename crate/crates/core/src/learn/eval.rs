//! Evaluation harnesses: k-fold cross-validation and the temporal
//! train-old/test-new protocol.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, ClassifierKind, Label, LabeledDataset, LearnError, Metrics};
use crate::derive_seed;
use crate::pca::{fit_pca, PcaModel};

/// Per-fold metrics plus macro averages. The averages are reported as
/// plain fields rather than a synthetic `Metrics` because the mean of fold
/// F-measures is not the F-measure of the mean precision/recall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f: f64,
}

/// A trained classifier paired with whatever it needs at prediction time.
pub enum FittedClassifier {
    Rf(super::RandomForestModel),
    Knn { k: usize, train: LabeledDataset },
}

impl FittedClassifier {
    pub fn fit(train: &LabeledDataset, spec: &ClassifierKind, seed: u64) -> Result<Self, LearnError> {
        match spec {
            ClassifierKind::RandomForest(params) => Ok(FittedClassifier::Rf(
                super::train_random_forest(train, params, seed)?,
            )),
            ClassifierKind::Knn { k } => {
                if train.len() < *k {
                    return Err(LearnError::TooFewRows { k: *k, n: train.len() });
                }
                Ok(FittedClassifier::Knn {
                    k: *k,
                    train: train.clone(),
                })
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, LearnError> {
        match self {
            FittedClassifier::Rf(model) => super::rf_predict(model, x),
            FittedClassifier::Knn { k, train } => super::knn_predict(train, x, *k),
        }
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>, LearnError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Seeded shuffle split into `folds` near-equal index chunks; the chunks
/// partition 0..n exactly.
pub(crate) fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(indices[at..at + size].to_vec());
        at += size;
    }
    out
}

/// K-fold cross-validation: seeded shuffle, `folds` train/test rotations,
/// metrics macro-averaged over folds. When `pca_k` is set, the projection
/// is fitted on each fold's training split only.
pub fn kfold_cv(
    data: &LabeledDataset,
    folds: usize,
    spec: &ClassifierKind,
    pca_k: Option<usize>,
    seed: u64,
) -> Result<CvReport, LearnError> {
    if folds < 2 {
        return Err(LearnError::TooFewFolds(folds));
    }
    if data.len() < folds {
        return Err(LearnError::TooFewRowsForFolds {
            n: data.len(),
            folds,
        });
    }
    let (benign, malware) = data.class_counts();
    if folds > benign.min(malware) {
        return Err(LearnError::FoldsExceedClassCount {
            folds,
            class_count: benign.min(malware),
        });
    }

    let chunks = fold_indices(data.len(), folds, seed);
    let mut fold_metrics = Vec::with_capacity(folds);
    for (f, test_idx) in chunks.iter().enumerate() {
        let train_idx: Vec<usize> = chunks
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, c)| c.iter().copied())
            .collect();
        let train = data.subset(&train_idx);
        let test = data.subset(test_idx);
        let m = train_and_score(&train, &test, spec, pca_k, derive_seed(seed, f as u64))?;
        fold_metrics.push(m);
    }

    let k = fold_metrics.len() as f64;
    Ok(CvReport {
        mean_precision: fold_metrics.iter().map(|m| m.precision).sum::<f64>() / k,
        mean_recall: fold_metrics.iter().map(|m| m.recall).sum::<f64>() / k,
        mean_f: fold_metrics.iter().map(|m| m.f_measure).sum::<f64>() / k,
        folds: fold_metrics,
    })
}

fn train_and_score(
    train: &LabeledDataset,
    test: &LabeledDataset,
    spec: &ClassifierKind,
    pca_k: Option<usize>,
    seed: u64,
) -> Result<Metrics, LearnError> {
    let (train_x, test_x, _) = maybe_project(train, test, pca_k)?;
    let train = train.with_features(train_x);
    let fitted = FittedClassifier::fit(&train, spec, seed)?;
    let preds = fitted.predict_all(&test_x)?;
    Ok(compute_metrics(&test.y, &preds))
}

fn maybe_project(
    train: &LabeledDataset,
    test: &LabeledDataset,
    pca_k: Option<usize>,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Option<PcaModel>), LearnError> {
    match pca_k {
        None => Ok((train.x.clone(), test.x.clone(), None)),
        Some(k) => {
            let pca = fit_pca(&train.x, k)?;
            let train_x = pca.transform_rows(&train.x)?;
            let test_x = pca.transform_rows(&test.x)?;
            Ok((train_x, test_x, Some(pca)))
        }
    }
}

/// One temporal evaluation row: a test epoch, its distance in years from
/// the training reference epoch, and the metrics achieved there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochEval {
    pub epoch: i32,
    pub delta: i32,
    pub metrics: Metrics,
}

/// Trains once on `train` and scores each per-epoch test set. The
/// reference epoch is the newest year in the training set; negative deltas
/// therefore mean testing on older samples. App ids must be disjoint
/// between the training set and every test set.
pub fn temporal_eval(
    train: &LabeledDataset,
    tests: &[LabeledDataset],
    spec: &ClassifierKind,
    pca_k: Option<usize>,
    seed: u64,
) -> Result<Vec<EpochEval>, LearnError> {
    let train_ids: std::collections::HashSet<&str> =
        train.app_ids.iter().map(|s| s.as_str()).collect();
    let mut overlapping: Vec<String> = tests
        .iter()
        .flat_map(|t| t.app_ids.iter())
        .filter(|id| train_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !overlapping.is_empty() {
        overlapping.sort();
        overlapping.dedup();
        return Err(LearnError::OverlappingAppIds(overlapping));
    }

    let reference = train.epochs.iter().copied().max().unwrap_or(0);

    let pca = match pca_k {
        None => None,
        Some(k) => Some(fit_pca(&train.x, k)?),
    };
    let train_proj = match &pca {
        None => train.clone(),
        Some(p) => train.with_features(p.transform_rows(&train.x)?),
    };
    let fitted = FittedClassifier::fit(&train_proj, spec, seed)?;

    let mut evals = Vec::with_capacity(tests.len());
    for test in tests {
        let epoch = test.epochs.iter().copied().max().unwrap_or(reference);
        let test_x = match &pca {
            None => test.x.clone(),
            Some(p) => p.transform_rows(&test.x)?,
        };
        let preds = fitted.predict_all(&test_x)?;
        evals.push(EpochEval {
            epoch,
            delta: epoch - reference,
            metrics: compute_metrics(&test.y, &preds),
        });
    }
    evals.sort_by_key(|e| e.delta);
    Ok(evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::testdata::blobs;
    use crate::learn::RandomForestParams;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn folds_partition_the_index_set() {
        for (n, folds) in [(100, 10), (103, 10), (10, 5), (17, 3)] {
            let chunks = fold_indices(n, folds, 7);
            assert_eq!(chunks.len(), folds);
            let mut all: Vec<usize> = chunks.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = chunks.iter().map(|c| c.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn separable_data_scores_high() {
        let data = blobs(100, 4, 3.0, 31);
        let spec = ClassifierKind::RandomForest(RandomForestParams {
            n_trees: 25,
            max_depth: 8,
            features_per_split: None,
            bootstrap_rate: 1.0,
        });
        let report = kfold_cv(&data, 10, &spec, None, 5).unwrap();
        assert!(report.mean_f >= 0.95, "mean F {}", report.mean_f);
        assert_eq!(report.folds.len(), 10);
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        let mut data = blobs(100, 4, 3.0, 32);
        data.y.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let spec = ClassifierKind::RandomForest(RandomForestParams {
            n_trees: 25,
            max_depth: 8,
            features_per_split: None,
            bootstrap_rate: 1.0,
        });
        let report = kfold_cv(&data, 10, &spec, None, 5).unwrap();
        assert!(
            (report.mean_f - 0.5).abs() <= 0.1,
            "null-model mean F {}",
            report.mean_f
        );
    }

    #[test]
    fn same_seed_is_deterministic() {
        let data = blobs(50, 4, 1.0, 33);
        let spec = ClassifierKind::Knn { k: 3 };
        let a = kfold_cv(&data, 5, &spec, None, 11).unwrap();
        let b = kfold_cv(&data, 5, &spec, None, 11).unwrap();
        assert_eq!(a.folds, b.folds);
        assert_eq!(fold_indices(100, 10, 4), fold_indices(100, 10, 4));
    }

    #[test]
    fn fold_count_guards() {
        let data = blobs(4, 2, 1.0, 34); // 4 per class
        assert!(matches!(
            kfold_cv(&data, 1, &ClassifierKind::Knn { k: 1 }, None, 0),
            Err(LearnError::TooFewFolds(1))
        ));
        assert!(matches!(
            kfold_cv(&data, 5, &ClassifierKind::Knn { k: 1 }, None, 0),
            Err(LearnError::FoldsExceedClassCount { .. })
        ));
    }

    #[test]
    fn cv_with_pca_projects_per_fold() {
        let data = blobs(60, 6, 3.0, 35);
        let spec = ClassifierKind::Knn { k: 1 };
        let report = kfold_cv(&data, 5, &spec, Some(2), 3).unwrap();
        assert!(report.mean_f >= 0.9, "mean F {}", report.mean_f);
    }

    #[test]
    fn temporal_stable_when_distribution_is_frozen() {
        let train = blobs(150, 4, 3.0, 40);
        let mut t0 = blobs(60, 4, 3.0, 41);
        for (i, id) in t0.app_ids.iter_mut().enumerate() {
            *id = format!("t0-{i}");
        }
        let mut t1 = blobs(60, 4, 3.0, 42);
        for (i, id) in t1.app_ids.iter_mut().enumerate() {
            *id = format!("t1-{i}");
        }
        for e in &mut t1.epochs {
            *e = 2015;
        }
        let spec = ClassifierKind::RandomForest(RandomForestParams {
            n_trees: 25,
            max_depth: 8,
            features_per_split: None,
            bootstrap_rate: 1.0,
        });
        let evals = temporal_eval(&train, &[t0, t1], &spec, None, 2).unwrap();
        assert_eq!(evals.len(), 2);
        assert_eq!(evals[0].delta, 0);
        assert_eq!(evals[1].delta, 1);
        assert!((evals[0].metrics.f_measure - evals[1].metrics.f_measure).abs() <= 0.05);
    }

    #[test]
    fn temporal_degrades_when_the_test_distribution_moves() {
        let train = blobs(150, 4, 3.0, 43);
        let mut same = blobs(60, 4, 3.0, 44);
        for (i, id) in same.app_ids.iter_mut().enumerate() {
            *id = format!("s-{i}");
        }
        // malware blob moved onto the benign blob: recall collapses
        let mut moved = blobs(60, 4, 0.0, 45);
        for (i, id) in moved.app_ids.iter_mut().enumerate() {
            *id = format!("m-{i}");
        }
        for e in &mut moved.epochs {
            *e = 2016;
        }
        let spec = ClassifierKind::RandomForest(RandomForestParams {
            n_trees: 25,
            max_depth: 8,
            features_per_split: None,
            bootstrap_rate: 1.0,
        });
        let evals = temporal_eval(&train, &[same, moved], &spec, None, 2).unwrap();
        assert!(evals[1].metrics.f_measure < evals[0].metrics.f_measure - 0.05);
    }

    #[test]
    fn overlapping_ids_are_rejected() {
        let train = blobs(10, 2, 1.0, 46);
        let test = blobs(5, 2, 1.0, 47); // same id scheme: app-0, app-1, ...
        let err = temporal_eval(&train, &[test], &ClassifierKind::Knn { k: 1 }, None, 0);
        assert!(matches!(err, Err(LearnError::OverlappingAppIds(_))));
    }

    #[test]
    fn train_equals_test_is_memorized_by_rf() {
        let train = blobs(50, 4, 3.0, 48);
        let mut test = train.clone();
        for (i, id) in test.app_ids.iter_mut().enumerate() {
            *id = format!("copy-{i}");
        }
        let spec = ClassifierKind::RandomForest(RandomForestParams::family());
        let evals = temporal_eval(&train, &[test], &spec, None, 1).unwrap();
        assert_eq!(evals[0].metrics.f_measure, 1.0);
    }
}
