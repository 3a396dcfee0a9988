//! Trained-model persistence. A model file carries everything inference
//! needs to refuse mismatched inputs: the mode, the exact state-space
//! layout the features were built over, the optional PCA projection, the
//! classifier with its fixed hyperparameters and tie rules, and the seed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::Mode;
use crate::learn::{
    knn_predict, rf_predict, ClassifierKind, Label, LabeledDataset, LearnError, RandomForestModel,
    RandomForestParams, Tree,
};
use crate::markov::StateSpace;
use crate::pca::{fit_pca, PcaModel};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported layout version {0}")]
    UnsupportedLayout(u32),
    #[error("input has {got} features but the model expects {expected} (state space width {width})")]
    InputWidth {
        expected: usize,
        got: usize,
        width: usize,
    },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Pca(#[from] crate::pca::PcaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModelParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub features_per_split: usize,
    pub bootstrap_rate: f64,
    pub split: String,
    pub tie_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModelParams {
    pub k: usize,
    pub distance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMatrix {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
    pub app_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ClassifierModel {
    #[serde(rename = "random-forest")]
    RandomForest {
        params: RfModelParams,
        trees: Vec<Tree>,
    },
    #[serde(rename = "knn")]
    Knn {
        params: KnnModelParams,
        train_matrix: TrainMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mode: Mode,
    pub state_space: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
    pub classifier: ClassifierModel,
    pub seed: u64,
    pub layout_version: u32,
}

/// Trains a classifier (optionally behind a PCA projection fitted on the
/// same data) and packages it with its layout.
pub fn train_model(
    data: &LabeledDataset,
    space: &StateSpace,
    spec: &ClassifierKind,
    pca_k: Option<usize>,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let expected = space.feature_len();
    if data.dim() != expected {
        return Err(ModelError::InputWidth {
            expected,
            got: data.dim(),
            width: space.len(),
        });
    }

    let (pca, train) = match pca_k {
        None => (None, data.clone()),
        Some(k) => {
            let pca = fit_pca(&data.x, k)?;
            let projected = data.with_features(pca.transform_rows(&data.x)?);
            (Some(pca), projected)
        }
    };

    let classifier = match spec {
        ClassifierKind::RandomForest(params) => {
            let model = crate::learn::train_random_forest(&train, params, seed)?;
            ClassifierModel::RandomForest {
                params: RfModelParams {
                    n_trees: params.n_trees,
                    max_depth: params.max_depth,
                    features_per_split: model
                        .params
                        .features_per_split
                        .unwrap_or((train.dim() as f64).sqrt().floor() as usize),
                    bootstrap_rate: params.bootstrap_rate,
                    split: "gini".to_string(),
                    tie_rule: "malware".to_string(),
                },
                trees: model.trees,
            }
        }
        ClassifierKind::Knn { k } => {
            if train.len() < *k {
                return Err(LearnError::TooFewRows { k: *k, n: train.len() }.into());
            }
            ClassifierModel::Knn {
                params: KnnModelParams {
                    k: *k,
                    distance: "euclidean".to_string(),
                },
                train_matrix: TrainMatrix {
                    x: train.x.clone(),
                    y: train.y.clone(),
                    app_ids: train.app_ids.clone(),
                },
            }
        }
    };

    Ok(TrainedModel {
        mode: space.mode(),
        state_space: space.names().to_vec(),
        pca,
        classifier,
        seed,
        layout_version: LAYOUT_VERSION,
    })
}

impl TrainedModel {
    /// Raw feature width this model accepts: |state space|^2.
    pub fn expected_input_dim(&self) -> usize {
        self.state_space.len() * self.state_space.len()
    }

    pub fn classifier_input_dim(&self) -> usize {
        match &self.pca {
            Some(p) => p.component_count(),
            None => self.expected_input_dim(),
        }
    }

    /// Predicts raw-width feature rows, applying the embedded PCA first
    /// when present. Raw-width means |S|^2: a model trained behind PCA
    /// still refuses already-projected vectors.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>, ModelError> {
        if self.layout_version != LAYOUT_VERSION {
            return Err(ModelError::UnsupportedLayout(self.layout_version));
        }
        let expected = self.expected_input_dim();
        for row in rows {
            if row.len() != expected {
                return Err(ModelError::InputWidth {
                    expected,
                    got: row.len(),
                    width: self.state_space.len(),
                });
            }
        }

        let projected: Vec<Vec<f64>> = match &self.pca {
            None => rows.to_vec(),
            Some(p) => p.transform_rows(rows)?,
        };

        match &self.classifier {
            ClassifierModel::RandomForest { params, trees } => {
                let rf = RandomForestModel {
                    trees: trees.clone(),
                    params: RandomForestParams {
                        n_trees: params.n_trees,
                        max_depth: params.max_depth,
                        features_per_split: Some(params.features_per_split),
                        bootstrap_rate: params.bootstrap_rate,
                    },
                    seed: self.seed,
                    dim: self.classifier_input_dim(),
                };
                projected
                    .iter()
                    .map(|r| rf_predict(&rf, r).map_err(ModelError::from))
                    .collect()
            }
            ClassifierModel::Knn { params, train_matrix } => {
                let train = LabeledDataset {
                    x: train_matrix.x.clone(),
                    y: train_matrix.y.clone(),
                    epochs: vec![0; train_matrix.y.len()],
                    app_ids: train_matrix.app_ids.clone(),
                };
                projected
                    .iter()
                    .map(|r| knn_predict(&train, r, params.k).map_err(ModelError::from))
                    .collect()
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let model: TrainedModel = serde_json::from_str(&text)?;
        if model.layout_version != LAYOUT_VERSION {
            return Err(ModelError::UnsupportedLayout(model.layout_version));
        }
        Ok(model)
    }
}
