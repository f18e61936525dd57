//! Base-model selection analytics for reward modeling.
//!
//! The crate works on ingested score tables: RewardBench results of reward
//! models trained on top of many base LLMs, benchmark results of those base
//! models, attribute scores, and per-token log-probabilities. It provides
//!
//! - leaderboard tables: relative gains inside size groups, post-training
//!   deltas, and Bradley-Terry versus regression differences ([`leaderboard`]),
//! - Pearson/Spearman correlation with a Student-t significance test ([`stats`]),
//! - top-k coverage between rankings and a retention filter ([`coverage`]),
//! - an Elastic-Net performance predictor with cross-validated
//!   hyperparameters ([`predictor`]),
//! - exhaustive merge-weight search over attribute scores ([`merge_search`]),
//! - linear Bradley-Terry and attribute-regression reward heads ([`toy_rm`]),
//! - pre-training presence scores and Jensen-Shannon distances ([`pretrain_probe`]),
//! - PCA of the benchmark matrix ([`pca`]),
//! - and a reproducible report bundle tying everything together ([`report`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod error;
pub mod ingest;
pub mod leaderboard;
pub mod merge_search;
pub mod pca;
pub mod predictor;
pub mod pretrain_probe;
pub mod report;
pub mod stats;
pub mod synth;
pub mod toy_rm;

pub use error::{Error, ErrorKind, Result};
pub use ingest::{
    Category, FixtureSet, Method, ModelRecord, RewardBenchScores, RewardBenchTable, ScoreMatrix,
    SizeGroup,
};

/// Version string embedded in every emitted artifact.
pub const TOOL_VERSION: &str = concat!("rmselect ", env!("CARGO_PKG_VERSION"));
