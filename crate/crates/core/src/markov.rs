//! Per-app Markov chains over abstract states and their flattening into
//! fixed-layout feature vectors.
//!
//! A chain's probability matrix is the row-normalized transition count
//! matrix: P[j][k] = O[j][k] / sum_i O[j][i]. Rows with no outgoing
//! occurrences stay all-zero ("states that are not present in a chain are
//! represented as 0"), which keeps vectors sparse-friendly and makes the
//! probabilities exactly invariant under uniform duplication of the
//! transition multiset.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AbstractState, Mode, PackageCatalog};

/// Ordered state names plus the mode they were derived under. The order is
/// the feature-layout contract: feature index = source * len + target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    names: Vec<String>,
    mode: Mode,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new(names: Vec<String>, mode: Mode) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        StateSpace { names, mode, index }
    }

    pub fn from_catalog(catalog: &PackageCatalog, mode: Mode) -> Self {
        Self::new(catalog.state_names(mode), mode)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        if self.index.len() != self.names.len() {
            // deserialized without the skip field; fall back to scan
            return self.names.iter().position(|n| n == name);
        }
        self.index.get(name).copied()
    }

    /// Feature-vector length: |S|^2.
    pub fn feature_len(&self) -> usize {
        self.names.len() * self.names.len()
    }
}

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("state {0:?} is not in the active state space (catalog/mode mismatch)")]
    UnknownState(String),
}

/// Transition occurrence counts and row-normalized probabilities over a
/// state space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    n: usize,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

impl MarkovChain {
    pub fn state_count(&self) -> usize {
        self.n
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.n + to]
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.n + to]
    }

    pub fn row_probs(&self, from: usize) -> &[f64] {
        &self.probs[from * self.n..(from + 1) * self.n]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Tallies abstracted transition pairs into a chain. Every pair endpoint
/// must be a member of the state space.
pub fn build_chain(
    pairs: &[(AbstractState, AbstractState, u64)],
    space: &StateSpace,
) -> Result<MarkovChain, MarkovError> {
    let n = space.len();
    let mut counts = vec![0u64; n * n];
    for (from, to, mult) in pairs {
        let j = space
            .index_of(from.as_str())
            .ok_or_else(|| MarkovError::UnknownState(from.as_str().to_string()))?;
        let k = space
            .index_of(to.as_str())
            .ok_or_else(|| MarkovError::UnknownState(to.as_str().to_string()))?;
        counts[j * n + k] += mult;
    }

    let mut probs = vec![0.0; n * n];
    for j in 0..n {
        let row = &counts[j * n..(j + 1) * n];
        let total: u64 = row.iter().sum();
        if total > 0 {
            for k in 0..n {
                probs[j * n + k] = row[k] as f64 / total as f64;
            }
        }
    }

    Ok(MarkovChain { n, counts, probs })
}

/// A row-major flattening of a chain's probability matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub app_id: String,
    pub values: Vec<f64>,
}

pub fn feature_vector(chain: &MarkovChain, app_id: &str) -> FeatureVector {
    FeatureVector {
        app_id: app_id.to_string(),
        values: chain.probs.clone(),
    }
}

/// Inverse of the row-major flattening; `values.len()` must be a perfect
/// square.
pub fn unflatten(values: &[f64]) -> Vec<Vec<f64>> {
    let n = (values.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, values.len(), "feature vector length is not a square");
    values.chunks(n).map(|row| row.to_vec()).collect()
}
