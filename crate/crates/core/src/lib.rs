//! Batch forecasting pipeline for security-incident event streams.
//!
//! The crate turns time-stamped event streams and incident logs into one
//! weighted training set per (attack type, signal granularity, ground-truth
//! granularity) combination, classifies attack/no-attack with a discrete
//! Bayesian-network classifier, rebalances skewed training sets (SMOTE,
//! spread subsampling, SMOTE++), and evaluates every combination with
//! repeated stratified cross-validation and AUC.
//!
//! Module map:
//!
//! * [`timeline`] — event ingestion and sliding-window dataset generation
//! * [`dataset`] — weighted instance model, binary discretization, CSV I/O
//! * [`bayes`] — Bayesian-network classifier and CPT importance reports
//! * [`resample`] — SMOTE, spread subsampling, SMOTE++, k-means, k-NN
//! * [`eval`] — cross-validation harness, AUC, t-tests, CFS, sweeps

pub mod bayes;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod resample;
pub mod seed;
pub mod span;
pub mod timeline;

pub use error::{Error, Result};
