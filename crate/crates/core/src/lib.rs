//! Desk-scale auditing of score-based membership inference attacks.
//!
//! The crate trains small dense classifiers on synthetic Gaussian-mixture
//! data, mounts the three classic score-based attacks (entropy threshold,
//! maximum-score threshold, top-3 MLP) via a single shadow model, and
//! measures how overconfidence, calibration, and defenses move the attack
//! metrics.
//!
//! Module map:
//!
//! - [`nn`] — dense (leaky-)ReLU networks, manual backprop, Adam/SGD,
//!   label smoothing, temperature-scaled softmax, binary model persistence.
//! - [`data`] — mixture generators, disjoint splits, normalization, and the
//!   permuted/scaled/shifted/noise/fake dataset constructions.
//! - [`shadow`] — target/shadow preparation protocol and membership records.
//! - [`attacks`] — the three attacks, their fitting procedures, and the
//!   input-scaling sweep.
//! - [`metrics`] — confusion metrics, ROC/PR, calibration errors, MMPS,
//!   1-D earth mover's distance, Gaussian KDE, and report assembly.

pub mod attacks;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod shadow;

pub use error::{Error, Result};
