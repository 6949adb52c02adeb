//! Subgroup disparity audits for post-hoc feature-attribution explanations.
//!
//! The crate trains a small text classifier, explains its predictions with
//! six attribution methods, scores every explanation with seven quality
//! metrics and tests whether explanation quality differs between paired
//! subgroups (for example male/female variants of the same sentence).
//!
//! | module | contents |
//! |---|---|
//! | [`textmodel`] | tokenizer, embedding + MLP classifier, AdamW training |
//! | [`attribution`] | Gradient, GxI, IG, IGxI, LIME, KernelSHAP |
//! | [`metrics`] | AOPC comprehensiveness/sufficiency, soft variants, sparsity, Gini, sensitivity |
//! | [`stats`] | Mann-Whitney U, Cohen's d, disparity classification, TPR/TNR/APD |
//! | [`dataset`] | paired/unpaired loaders, COMPAS row-to-text, splits, synthetic pairs |
//! | [`pipeline`] | one audit run, repeated runs and their aggregation |
//! | [`report`] | result grids, CSV export and SVG box plots |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod planted;
pub mod report;
pub mod stats;
pub mod textmodel;

pub use error::{Error, Result};
