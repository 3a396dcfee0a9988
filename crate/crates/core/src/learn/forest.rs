//! Random forest: bootstrap-sampled, Gini-split decision trees with a
//! random feature subset per node.
//!
//! Every tree draws its randomness from a ChaCha stream derived from
//! (seed, tree index), so parallel and serial training produce
//! bit-identical forests. Tie rules are fixed and recorded in persisted
//! models: split ties keep the first candidate encountered, vote ties go
//! to malware.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledDataset, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features per node; `floor(sqrt(d))` when absent.
    pub features_per_split: Option<usize>,
    /// Bootstrap sample size as a fraction of n.
    pub bootstrap_rate: f64,
}

impl RandomForestParams {
    /// 51 trees of depth 8, the family-mode configuration.
    pub fn family() -> Self {
        RandomForestParams {
            n_trees: 51,
            max_depth: 8,
            features_per_split: None,
            bootstrap_rate: 1.0,
        }
    }

    /// 101 trees of depth 64, the package-mode configuration.
    pub fn package() -> Self {
        RandomForestParams {
            n_trees: 101,
            max_depth: 64,
            features_per_split: None,
            bootstrap_rate: 1.0,
        }
    }

    fn resolve_features_per_split(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    #[serde(rename = "split")]
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    #[serde(rename = "leaf")]
    Leaf {
        /// [benign, malware] sample counts at the leaf.
        votes: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { votes } => {
                    return if votes[1] >= votes[0] { Label::Malware } else { Label::Benign };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<Tree>,
    pub params: RandomForestParams,
    pub seed: u64,
    pub dim: usize,
}

/// Trains a forest. Deterministic given the seed regardless of thread
/// count; errors when the training data holds a single class.
pub fn train_random_forest(
    data: &LabeledDataset,
    params: &RandomForestParams,
    seed: u64,
) -> Result<RandomForestModel, LearnError> {
    if data.len() < 2 || !data.has_both_classes() {
        return Err(LearnError::SingleClass);
    }
    let d = data.dim();
    let features_per_split = params.resolve_features_per_split(d);
    let n_bootstrap = ((data.len() as f64 * params.bootstrap_rate).round() as usize).max(1);

    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let indices: Vec<usize> =
                (0..n_bootstrap).map(|_| rng.random_range(0..data.len())).collect();
            let mut builder = TreeBuilder {
                data,
                features_per_split,
                max_depth: params.max_depth,
                rng,
                nodes: Vec::new(),
            };
            builder.build(indices, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(RandomForestModel {
        trees,
        params: params.clone(),
        seed,
        dim: d,
    })
}

/// Majority vote over trees; an even split goes to malware.
pub fn rf_predict(model: &RandomForestModel, x: &[f64]) -> Result<Label, LearnError> {
    if x.len() != model.dim {
        return Err(LearnError::Dimension {
            expected: model.dim,
            got: x.len(),
        });
    }
    let malware_votes = model
        .trees
        .iter()
        .filter(|t| t.predict(x).is_malware())
        .count();
    Ok(if 2 * malware_votes >= model.trees.len() {
        Label::Malware
    } else {
        Label::Benign
    })
}

struct TreeBuilder<'a> {
    data: &'a LabeledDataset,
    features_per_split: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `indices`, returning its node id. Children are
    /// built depth-first (left before right) so RNG consumption order is
    /// well-defined.
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&indices);
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.max_depth || indices.len() < 2 {
            return self.push_leaf(counts);
        }

        let Some((feature, threshold)) = self.best_split(&indices) else {
            return self.push_leaf(counts);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.data.x[i][feature] <= threshold);
        debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { votes: [0, 0] }); // placeholder
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn push_leaf(&mut self, votes: [u32; 2]) -> usize {
        self.nodes.push(TreeNode::Leaf { votes });
        self.nodes.len() - 1
    }

    fn class_counts(&self, indices: &[usize]) -> [u32; 2] {
        let mut counts = [0u32; 2];
        for &i in indices {
            counts[self.data.y[i].is_malware() as usize] += 1;
        }
        counts
    }

    /// Best Gini split over a random feature subset. Candidate thresholds
    /// are midpoints between consecutive distinct values; ties keep the
    /// first candidate in (drawn-feature, ascending-threshold) order.
    fn best_split(&mut self, indices: &[usize]) -> Option<(usize, f64)> {
        let d = self.data.dim();
        let features = sample_distinct(&mut self.rng, d, self.features_per_split);
        let n = indices.len() as f64;

        let mut best: Option<(f64, usize, f64)> = None; // (weighted impurity, feature, threshold)
        let mut values: Vec<(f64, bool)> = Vec::with_capacity(indices.len());
        for f in features {
            values.clear();
            values.extend(
                indices
                    .iter()
                    .map(|&i| (self.data.x[i][f], self.data.y[i].is_malware())),
            );
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            if values.first().map(|v| v.0) == values.last().map(|v| v.0) {
                continue; // constant feature
            }

            let total_malware = values.iter().filter(|v| v.1).count() as f64;
            let mut left_n = 0.0;
            let mut left_malware = 0.0;
            for w in 0..values.len() - 1 {
                left_n += 1.0;
                if values[w].1 {
                    left_malware += 1.0;
                }
                if values[w].0 == values[w + 1].0 {
                    continue; // not a boundary between distinct values
                }
                let right_n = n - left_n;
                let right_malware = total_malware - left_malware;
                let gini = |cnt: f64, malware: f64| {
                    if cnt == 0.0 {
                        0.0
                    } else {
                        let p = malware / cnt;
                        2.0 * p * (1.0 - p)
                    }
                };
                let weighted =
                    (left_n / n) * gini(left_n, left_malware) + (right_n / n) * gini(right_n, right_malware);
                if best.map_or(true, |(b, _, _)| weighted < b) {
                    let threshold = values[w].0 + (values[w + 1].0 - values[w].0) / 2.0;
                    best = Some((weighted, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// `count` distinct values from 0..d in draw order, by rejection; cheap
/// because count is far below d.
fn sample_distinct(rng: &mut ChaCha8Rng, d: usize, count: usize) -> Vec<usize> {
    let count = count.min(d);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let f = rng.random_range(0..d);
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}
