//! Evidential classification with subjective-logic uncertainty and
//! out-of-distribution detection.
//!
//! A network outputs non-negative evidence `e` per class; `alpha = e + 1`
//! parameterizes a Dirichlet whose subjective opinion splits uncertainty into
//! *vacuity* (lack of evidence, `K / S`) and *dissonance* (conflicting
//! evidence). Training mixes the evidential classification loss with terms
//! that raise vacuity on auxiliary outliers and on off-manifold embedding
//! perturbations, so that vacuity becomes an OOD score.
//!
//! Modules:
//!
//! * [`subjective_logic`]: opinions, vacuity, dissonance, entropy
//! * [`nn`]: a small reverse-mode autodiff tape, GRU cell, Adam, checkpoints
//! * [`model`]: 2-D MLP and GRU text classifiers, evidential loss and objective
//! * [`adversarial`]: off-manifold sample generation
//! * [`trainer`]: the three-step mixed training loop and the softmax baseline
//! * [`metrics`]: AUROC, AUPR, FPR at fixed recall, uncertainty summaries
//! * [`data`]: JSONL corpora, vocabulary, the synthetic task, uncertainty grids
//! * [`oracles`] and [`selfcheck`]: independent reference computations
//! * [`cli`]: the `evood` command line
//!
//! The crate's `examples/` directory has one runnable program per capability.

pub mod adversarial;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod oracles;
pub mod rng;
pub mod selfcheck;
pub mod subjective_logic;
pub mod trainer;

pub use error::{Error, Result};
