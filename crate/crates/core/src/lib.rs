//! Multi-label classification with model-agnostic Shapley explanations.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: dataset loading (ARFF subset, CSV), row subsets and fold plans.
//! - [`forest`]: entropy decision trees bagged into a random forest, the
//!   binary base learner for the problem-transformation methods.
//! - [`multilabel`]: binary relevance, classifier chains and ML-kNN behind a
//!   single per-label probability contract.
//! - [`eval`]: multi-label metrics and repeated k-fold grid search.
//! - [`shap`]: exact subset enumeration and Kernel SHAP estimators.
//! - [`explainviz`]: importance, summary and force views with JSON/SVG output.

pub mod data;
pub mod error;
pub mod eval;
pub mod explainviz;
pub mod forest;
pub mod multilabel;
pub mod seed;
pub mod shap;

pub use error::{Error, Result};
