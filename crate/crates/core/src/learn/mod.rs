//! Classifiers and evaluation harnesses: random forest, 1-NN/3-NN,
//! precision/recall/F metrics, 10-fold cross-validation, and the temporal
//! train-old/test-new protocol.

mod eval;
mod forest;
mod knn;

pub use eval::{kfold_cv, temporal_eval, CvReport, EpochEval, FittedClassifier};
pub use forest::{rf_predict, train_random_forest, RandomForestModel, RandomForestParams, Tree, TreeNode};
pub use knn::knn_predict;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("k-NN needs at least k={k} training rows, got {n}")]
    TooFewRows { k: usize, n: usize },
    #[error("{folds} folds exceed the smaller class count ({class_count})")]
    FoldsExceedClassCount { folds: usize, class_count: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("dataset has {n} rows, fewer than {folds} folds")]
    TooFewRowsForFolds { n: usize, folds: usize },
    #[error("train and test sets share app ids: {0:?}")]
    OverlappingAppIds(Vec<String>),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Pca(#[from] crate::pca::PcaError),
}

/// Binary ground-truth label; malware is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malware,
}

impl Label {
    pub fn is_malware(self) -> bool {
        matches!(self, Label::Malware)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Benign => write!(f, "benign"),
            Label::Malware => write!(f, "malware"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "malware" => Ok(Label::Malware),
            other => Err(format!("unknown label {other:?} (expected benign or malware)")),
        }
    }
}

/// Feature rows with labels, epoch year tags, and app ids.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
    pub epochs: Vec<i32>,
    pub app_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let malware = self.y.iter().filter(|l| l.is_malware()).count();
        (self.len() - malware, malware)
    }

    pub fn has_both_classes(&self) -> bool {
        let (benign, malware) = self.class_counts();
        benign > 0 && malware > 0
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            epochs: indices.iter().map(|&i| self.epochs[i]).collect(),
            app_ids: indices.iter().map(|&i| self.app_ids[i].clone()).collect(),
        }
    }

    /// Replaces the feature matrix, keeping labels and metadata.
    pub fn with_features(&self, x: Vec<Vec<f64>>) -> LabeledDataset {
        assert_eq!(x.len(), self.len());
        LabeledDataset {
            x,
            y: self.y.clone(),
            epochs: self.epochs.clone(),
            app_ids: self.app_ids.clone(),
        }
    }
}

/// Classification quality with malware as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// Standard precision/recall/F over paired label vectors. Empty input
/// yields all-zero metrics; undefined ratios are 0.
pub fn compute_metrics(y_true: &[Label], y_pred: &[Label]) -> Metrics {
    assert_eq!(y_true.len(), y_pred.len(), "label vectors must align");
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t.is_malware(), p.is_malware()) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        precision,
        recall,
        f_measure,
        tp,
        fp,
        fn_,
        tn,
    }
}

/// Which classifier an evaluation harness trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierKind {
    RandomForest(RandomForestParams),
    Knn { k: usize },
}

impl ClassifierKind {
    pub fn describe(&self) -> String {
        match self {
            ClassifierKind::RandomForest(p) => format!("rf-{}x{}", p.n_trees, p.max_depth),
            ClassifierKind::Knn { k } => format!("{k}nn"),
        }
    }
}
