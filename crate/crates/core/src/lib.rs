//! Counterfactual explanation engine for tabular binary classifiers.
//!
//! The crate bundles four instance-centric counterfactual generators
//! (a distance-loss optimizer, growing spheres, a diverse multi-candidate
//! method and a prototype-guided method), three from-scratch predictor
//! families (decision tree, random forest, feed-forward network), a
//! quantitative metric suite, decision-path bias analysis, and a
//! configuration-driven benchmark runner that ties them together
//! reproducibly.

pub mod bench;
pub mod cf;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod paths;

pub use error::{Error, Result};
