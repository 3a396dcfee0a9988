//! End-to-end featurization: manifest in, one feature row per app out,
//! plus a skip report for apps that failed parsing and per-stage wall
//! clock totals.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::{AbstractState, Mode, PackageCatalog};
use crate::callgraph::{parse_call_graph, CallGraph, TraversalPolicy};
use crate::datasets::Manifest;
use crate::learn::{Label, LabeledDataset};
use crate::markov::{build_chain, feature_vector, FeatureVector, MarkovError, StateSpace};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("every app in the manifest failed to parse")]
    AllAppsFailed,
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// One featurized app.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub app_id: String,
    pub label: Label,
    pub epoch: i32,
    pub values: Vec<f64>,
}

/// An app excluded from the feature matrix, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedApp {
    pub app_id: String,
    pub reason: String,
}

/// Accumulated wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn add(&mut self, stage: &str, seconds: f64) {
        match self.stages.iter_mut().find(|(s, _)| s == stage) {
            Some((_, total)) => *total += seconds,
            None => self.stages.push((stage.to_string(), seconds)),
        }
    }

    pub fn stages(&self) -> &[(String, f64)] {
        &self.stages
    }

    pub fn merge(&mut self, other: &Timings) {
        for (stage, secs) in &other.stages {
            self.add(stage, *secs);
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeaturizeOutput {
    pub rows: Vec<FeatureRow>,
    pub skipped: Vec<SkippedApp>,
    pub timings: Timings,
    pub state_space: StateSpace,
}

impl FeaturizeOutput {
    /// Feature rows as a labeled dataset (epoch and app id carried over).
    pub fn to_dataset(&self) -> LabeledDataset {
        LabeledDataset {
            x: self.rows.iter().map(|r| r.values.clone()).collect(),
            y: self.rows.iter().map(|r| r.label).collect(),
            epochs: self.rows.iter().map(|r| r.epoch).collect(),
            app_ids: self.rows.iter().map(|r| r.app_id.clone()).collect(),
        }
    }
}

/// Abstracted transition pairs of a graph under the catalog and mode;
/// pairs touching an excluded family are dropped without re-joining.
pub fn abstract_transitions(
    graph: &CallGraph,
    catalog: &PackageCatalog,
    mode: Mode,
    policy: TraversalPolicy,
) -> Vec<(AbstractState, AbstractState, u64)> {
    graph
        .transition_multiset(policy)
        .iter()
        .filter_map(|(u, v, mult)| {
            let a = catalog.abstract_method(u, mode)?;
            let b = catalog.abstract_method(v, mode)?;
            Some((a, b, mult))
        })
        .collect()
}

/// Featurizes a single parsed graph.
pub fn featurize_graph(
    graph: &CallGraph,
    catalog: &PackageCatalog,
    space: &StateSpace,
    policy: TraversalPolicy,
) -> Result<FeatureVector, MarkovError> {
    let pairs = abstract_transitions(graph, catalog, space.mode(), policy);
    let chain = build_chain(&pairs, space)?;
    Ok(feature_vector(&chain, graph.app_id()))
}

/// Featurizes every app in manifest order. Apps whose call-graph file does
/// not parse are skipped and reported; an empty graph yields an all-zero
/// row with a warning. Errors only when every single app fails.
pub fn featurize_manifest(
    manifest: &Manifest,
    catalog: &PackageCatalog,
    mode: Mode,
    policy: TraversalPolicy,
) -> Result<FeaturizeOutput, PipelineError> {
    let space = StateSpace::from_catalog(catalog, mode);

    enum AppResult {
        Row(FeatureRow, Timings),
        Skip(SkippedApp),
    }

    let results: Vec<AppResult> = manifest
        .rows()
        .par_iter()
        .map(|row| {
            let mut timings = Timings::default();

            let t0 = Instant::now();
            let text = match std::fs::read_to_string(manifest.resolve(row)) {
                Ok(t) => t,
                Err(e) => {
                    return AppResult::Skip(SkippedApp {
                        app_id: row.app_id.clone(),
                        reason: format!("read failed: {e}"),
                    })
                }
            };
            let graph = match parse_call_graph(&text, &row.app_id) {
                Ok(g) => g,
                Err(e) => {
                    return AppResult::Skip(SkippedApp {
                        app_id: row.app_id.clone(),
                        reason: e.to_string(),
                    })
                }
            };
            timings.add("parse", t0.elapsed().as_secs_f64());
            if graph.node_count() == 0 {
                log::warn!("{}: empty call graph, emitting an all-zero row", row.app_id);
            }

            let t1 = Instant::now();
            let pairs = abstract_transitions(&graph, catalog, mode, policy);
            timings.add("abstract", t1.elapsed().as_secs_f64());

            let t2 = Instant::now();
            let chain = match build_chain(&pairs, &space) {
                Ok(c) => c,
                Err(e) => {
                    return AppResult::Skip(SkippedApp {
                        app_id: row.app_id.clone(),
                        reason: e.to_string(),
                    })
                }
            };
            let fv = feature_vector(&chain, &row.app_id);
            timings.add("markov", t2.elapsed().as_secs_f64());

            AppResult::Row(
                FeatureRow {
                    app_id: row.app_id.clone(),
                    label: row.label,
                    epoch: row.epoch,
                    values: fv.values,
                },
                timings,
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut timings = Timings::default();
    timings.add("parse", 0.0);
    timings.add("abstract", 0.0);
    timings.add("markov", 0.0);
    for r in results {
        match r {
            AppResult::Row(row, t) => {
                timings.merge(&t);
                rows.push(row);
            }
            AppResult::Skip(s) => {
                log::warn!("skipping {}: {}", s.app_id, s.reason);
                skipped.push(s);
            }
        }
    }

    if rows.is_empty() && !manifest.is_empty() {
        return Err(PipelineError::AllAppsFailed);
    }
    Ok(FeaturizeOutput {
        rows,
        skipped,
        timings,
        state_space: space,
    })
}
