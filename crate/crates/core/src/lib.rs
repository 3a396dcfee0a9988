//! Behavioral app classification from abstracted API-call transitions.
//!
//! The pipeline ingests serialized call graphs, abstracts every method
//! signature to a package or family state, models the transition structure
//! as a per-app Markov chain, flattens the chain into a fixed-layout
//! feature vector, and classifies apps as benign or malware with a random
//! forest or k-NN. A frequency-analysis baseline, a synthetic corpus
//! generator with controllable drift, PCA, and evaluation harnesses
//! (10-fold CV, temporal train-old/test-new) round out the toolkit.

pub mod abstraction;
pub mod baseline;
pub mod callgraph;
pub mod datasets;
pub mod learn;
pub mod markov;
pub mod model;
pub mod pca;
pub mod pipeline;
pub mod reports;

mod seed;

pub use seed::derive_seed;
