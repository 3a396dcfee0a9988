//! Frequency-analysis baseline: binary presence of the API calls most
//! frequent in malware (at least a 6% malware-benign presence gap, top
//! 169), classified with 3-NN on a 2/3-1/3 split. Feature selection only
//! ever sees training data.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::callgraph::{CallGraph, MethodRef};
use crate::learn::{compute_metrics, knn_predict, Label, LabeledDataset, LearnError, Metrics};

pub const DEFAULT_MIN_GAP: f64 = 0.06;
pub const DEFAULT_TOP_N: usize = 169;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("corpus has no {0} apps")]
    EmptyClass(Label),
    #[error("split leaves the {0} side degenerate")]
    DegenerateSplit(&'static str),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// The raw-call identity used for frequency analysis.
pub fn call_key(m: &MethodRef) -> String {
    format!("{}.{}: {}", m.package, m.class_name, m.method_name)
}

/// Distinct call keys an app contains: everything it invokes (callees).
pub fn app_call_set(g: &CallGraph) -> BTreeSet<String> {
    g.edges().map(|(_, callee)| call_key(callee)).collect()
}

/// Per-call presence fractions in each class, computed over distinct apps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    /// (call key, malware fraction, benign fraction), keyed lexicographically.
    rows: Vec<(String, f64, f64)>,
}

impl FrequencyTable {
    pub fn rows(&self) -> &[(String, f64, f64)] {
        &self.rows
    }

    pub fn get(&self, call: &str) -> Option<(f64, f64)> {
        self.rows
            .binary_search_by(|(c, _, _)| c.as_str().cmp(call))
            .ok()
            .map(|i| (self.rows[i].1, self.rows[i].2))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Tallies per-app call presence by class. Calls absent everywhere do not
/// appear; both classes must be represented.
pub fn build_frequency_table(apps: &[(&CallGraph, Label)]) -> Result<FrequencyTable, BaselineError> {
    let malware_total = apps.iter().filter(|(_, l)| l.is_malware()).count();
    let benign_total = apps.len() - malware_total;
    if malware_total == 0 {
        return Err(BaselineError::EmptyClass(Label::Malware));
    }
    if benign_total == 0 {
        return Err(BaselineError::EmptyClass(Label::Benign));
    }

    let mut presence: std::collections::BTreeMap<String, (u32, u32)> = Default::default();
    for (g, label) in apps {
        for call in app_call_set(g) {
            let entry = presence.entry(call).or_insert((0, 0));
            if label.is_malware() {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }

    let rows = presence
        .into_iter()
        .map(|(call, (m, b))| {
            (
                call,
                m as f64 / malware_total as f64,
                b as f64 / benign_total as f64,
            )
        })
        .collect();
    Ok(FrequencyTable { rows })
}

/// Calls whose malware presence exceeds their benign presence by at least
/// `min_gap`, ranked by malware presence (lexicographic on ties) and
/// truncated to `top_n`. May return fewer than `top_n`.
pub fn select_features(table: &FrequencyTable, min_gap: f64, top_n: usize) -> Vec<String> {
    let mut passing: Vec<&(String, f64, f64)> = table
        .rows
        .iter()
        .filter(|(_, m, b)| m - b >= min_gap)
        .collect();
    passing.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    passing.into_iter().take(top_n).map(|(c, _, _)| c.clone()).collect()
}

/// 0/1 presence vector over the selected calls, in selection order.
pub fn presence_vector(g: &CallGraph, features: &[String]) -> Vec<f64> {
    let contained = app_call_set(g);
    features
        .iter()
        .map(|f| if contained.contains(f) { 1.0 } else { 0.0 })
        .collect()
}

/// Outcome of one baseline run: held-out metrics plus the feature list the
/// training split selected.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub metrics: Metrics,
    pub selected: Vec<String>,
}

/// Trains on `train` and scores `test`: feature selection on the training
/// apps only, binary presence vectors, 3-NN.
pub fn evaluate_split(
    train: &[(&CallGraph, Label)],
    test: &[(&CallGraph, Label)],
    min_gap: f64,
    top_n: usize,
) -> Result<BaselineOutcome, BaselineError> {
    if !has_both_classes(train) {
        return Err(BaselineError::DegenerateSplit("training"));
    }
    if test.is_empty() {
        return Err(BaselineError::DegenerateSplit("test"));
    }
    let table = build_frequency_table(train)?;
    let selected = select_features(&table, min_gap, top_n);

    let train_set = LabeledDataset {
        x: train.iter().map(|(g, _)| presence_vector(g, &selected)).collect(),
        y: train.iter().map(|(_, l)| *l).collect(),
        epochs: vec![0; train.len()],
        app_ids: train.iter().map(|(g, _)| g.app_id().to_string()).collect(),
    };

    let mut preds = Vec::with_capacity(test.len());
    for (g, _) in test {
        let x = presence_vector(g, &selected);
        preds.push(knn_predict(&train_set, &x, 3)?);
    }
    let truth: Vec<Label> = test.iter().map(|(_, l)| *l).collect();
    Ok(BaselineOutcome {
        metrics: compute_metrics(&truth, &preds),
        selected,
    })
}

/// The full protocol on one corpus: seeded shuffle, first 2/3 train, last
/// 1/3 test.
pub fn baseline_evaluate(
    corpus: &[(&CallGraph, Label)],
    seed: u64,
) -> Result<BaselineOutcome, BaselineError> {
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = corpus.len() * 2 / 3;
    let train: Vec<(&CallGraph, Label)> = indices[..cut].iter().map(|&i| corpus[i]).collect();
    let test: Vec<(&CallGraph, Label)> = indices[cut..].iter().map(|&i| corpus[i]).collect();
    evaluate_split(&train, &test, DEFAULT_MIN_GAP, DEFAULT_TOP_N)
}

fn has_both_classes(apps: &[(&CallGraph, Label)]) -> bool {
    apps.iter().any(|(_, l)| l.is_malware()) && apps.iter().any(|(_, l)| !l.is_malware())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::parse_call_graph;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// An app whose graph invokes exactly the given callee classes (one
    /// `go()` method each) from a single root method.
    fn app_with_calls(id: &str, calls: &[&str]) -> CallGraph {
        let text = calls
            .iter()
            .map(|c| format!("com.app.Root: void main() -> {c}: void go()"))
            .collect::<Vec<_>>()
            .join("\n");
        parse_call_graph(&text, id).unwrap()
    }

    fn sig(name: &str) -> String {
        format!("api.pkg.{name}")
    }

    #[test]
    fn presence_fractions_count_distinct_apps() {
        // call present in 8/10 malware and 5/10 benign
        let mut apps = Vec::new();
        for i in 0..10 {
            let calls: Vec<String> = if i < 8 { vec![sig("Hot")] } else { vec![sig("Cold")] };
            let refs: Vec<&str> = calls.iter().map(|s| s.as_str()).collect();
            apps.push((app_with_calls(&format!("m{i}"), &refs), Label::Malware));
        }
        for i in 0..10 {
            let calls: Vec<String> = if i < 5 { vec![sig("Hot")] } else { vec![sig("Cold")] };
            let refs: Vec<&str> = calls.iter().map(|s| s.as_str()).collect();
            apps.push((app_with_calls(&format!("b{i}"), &refs), Label::Benign));
        }
        let borrowed: Vec<(&CallGraph, Label)> = apps.iter().map(|(g, l)| (g, *l)).collect();
        let table = build_frequency_table(&borrowed).unwrap();
        let (m, b) = table.get("api.pkg.Hot: go").unwrap();
        assert_eq!((m, b), (0.8, 0.5));
        // a call absent everywhere is not in the table
        assert!(table.get("api.pkg.Never: go").is_none());
    }

    #[test]
    fn selection_applies_gap_and_ranking() {
        let mut rows = vec![
            ("a: x".to_string(), 0.80, 0.50), // gap 0.30: selected
            ("b: x".to_string(), 0.50, 0.45), // gap 0.05: rejected (boundary)
            ("c: x".to_string(), 0.80, 0.10), // ties with a on malware freq
            ("d: x".to_string(), 0.90, 0.80), // gap 0.10, highest malware freq
        ];
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let table = FrequencyTable { rows };
        let selected = select_features(&table, 0.06, 169);
        assert_eq!(selected, vec!["d: x", "a: x", "c: x"]);
        let top2 = select_features(&table, 0.06, 2);
        assert_eq!(top2, vec!["d: x", "a: x"]);
    }

    #[test]
    fn exact_gap_boundary_is_selected() {
        let table = FrequencyTable {
            rows: vec![("edge: m".to_string(), 0.56, 0.50)],
        };
        assert_eq!(select_features(&table, 0.06, 10).len(), 1);
    }

    #[test]
    fn selection_matches_sort_filter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<(String, f64, f64)> = (0..500)
            .map(|i| {
                (
                    format!("call{i:03}: m"),
                    (rng.random_range(0..=100) as f64) / 100.0,
                    (rng.random_range(0..=100) as f64) / 100.0,
                )
            })
            .collect();
        let mut sorted_rows = rows.clone();
        sorted_rows.sort_by(|a, b| a.0.cmp(&b.0));
        let table = FrequencyTable { rows: sorted_rows };
        let selected = select_features(&table, 0.06, 169);

        // oracle: filter then a full stable sort on (-malware, name)
        let mut oracle: Vec<(String, f64)> = rows
            .iter()
            .filter(|(_, m, b)| m - b >= 0.06)
            .map(|(c, m, _)| (c.clone(), *m))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let oracle: Vec<String> = oracle.into_iter().take(169).map(|(c, _)| c).collect();
        assert_eq!(selected, oracle);
        assert!(selected.len() <= 169);
        for c in &selected {
            let (m, b) = table.get(c).unwrap();
            assert!(m - b >= 0.06);
        }
    }

    #[test]
    fn recount_oracle_agrees_on_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let vocab: Vec<String> = (0..30).map(|i| sig(&format!("C{i}"))).collect();
        let mut apps = Vec::new();
        for i in 0..40 {
            let label = if i % 2 == 0 { Label::Malware } else { Label::Benign };
            let calls: Vec<String> = vocab
                .iter()
                .filter(|_| rng.random_bool(0.3))
                .cloned()
                .collect();
            let refs: Vec<&str> = calls.iter().map(|s| s.as_str()).collect();
            apps.push((app_with_calls(&format!("a{i}"), &refs), label));
        }
        let borrowed: Vec<(&CallGraph, Label)> = apps
            .iter()
            .filter(|(g, _)| g.node_count() > 0)
            .map(|(g, l)| (g, *l))
            .collect();
        let table = build_frequency_table(&borrowed).unwrap();

        let malware_total = borrowed.iter().filter(|(_, l)| l.is_malware()).count() as f64;
        let benign_total = borrowed.len() as f64 - malware_total;
        for (call, m_frac, b_frac) in table.rows() {
            let mut m = 0;
            let mut b = 0;
            for (g, l) in &borrowed {
                if app_call_set(g).contains(call) {
                    if l.is_malware() {
                        m += 1;
                    } else {
                        b += 1;
                    }
                }
            }
            assert_eq!(*m_frac, m as f64 / malware_total);
            assert_eq!(*b_frac, b as f64 / benign_total);
        }
    }

    #[test]
    fn empty_class_is_an_error() {
        let g = app_with_calls("only", &["a.b.C"]);
        let apps = vec![(&g, Label::Malware)];
        assert!(matches!(
            build_frequency_table(&apps),
            Err(BaselineError::EmptyClass(Label::Benign))
        ));
    }

    /// Corpus where malware uses a distinct vocabulary: the held-out score
    /// must be high and feature selection must be leak-free.
    #[test]
    fn separable_corpus_scores_well_and_selection_is_train_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut apps = Vec::new();
        for i in 0..60 {
            let label = if i % 2 == 0 { Label::Malware } else { Label::Benign };
            let pool: Vec<String> = if label.is_malware() {
                (0..8).map(|j| sig(&format!("Mal{j}"))).collect()
            } else {
                (0..8).map(|j| sig(&format!("Ben{j}"))).collect()
            };
            let mut calls: Vec<String> =
                pool.iter().filter(|_| rng.random_bool(0.8)).cloned().collect();
            if calls.is_empty() {
                calls.push(pool[0].clone());
            }
            let refs: Vec<&str> = calls.iter().map(|s| s.as_str()).collect();
            apps.push((app_with_calls(&format!("a{i}"), &refs), label));
        }
        let borrowed: Vec<(&CallGraph, Label)> = apps.iter().map(|(g, l)| (g, *l)).collect();
        let outcome = baseline_evaluate(&borrowed, 3).unwrap();
        assert!(outcome.metrics.f_measure >= 0.8, "F {}", outcome.metrics.f_measure);

        // leak-freedom: recompute the selection on the training 2/3 alone
        // and compare (same shuffle seed)
        let mut indices: Vec<usize> = (0..borrowed.len()).collect();
        indices.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let cut = borrowed.len() * 2 / 3;
        let train: Vec<(&CallGraph, Label)> = indices[..cut].iter().map(|&i| borrowed[i]).collect();
        let table = build_frequency_table(&train).unwrap();
        let train_only = select_features(&table, DEFAULT_MIN_GAP, DEFAULT_TOP_N);
        assert_eq!(outcome.selected, train_only);
    }

    #[test]
    fn same_seed_is_deterministic() {
        let mut apps = Vec::new();
        for i in 0..30 {
            let label = if i % 3 == 0 { Label::Malware } else { Label::Benign };
            let calls = if label.is_malware() { vec![sig("M")] } else { vec![sig("B")] };
            let refs: Vec<&str> = calls.iter().map(|s| s.as_str()).collect();
            apps.push((app_with_calls(&format!("a{i}"), &refs), label));
        }
        let borrowed: Vec<(&CallGraph, Label)> = apps.iter().map(|(g, l)| (g, *l)).collect();
        let a = baseline_evaluate(&borrowed, 11).unwrap();
        let b = baseline_evaluate(&borrowed, 11).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.selected, b.selected);
    }
}
