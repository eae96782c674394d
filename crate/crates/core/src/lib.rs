//! Block-based all-relevant feature selection.
//!
//! The pipeline groups correlated preliminary feature blocks by solving a
//! threshold-constrained weighted clique partitioning problem, then runs a
//! Boruta loop in which every block is shuffled as a unit: shadow blocks are
//! built by jointly permuting a block's rows, importances are held-out AUC
//! drops under joint permutation, and hits against the best shadow are tested
//! with exact binomial tests and Benjamini-Hochberg control. Cross-classifier
//! consensus and reduced-set evaluation sit on top of that loop.

pub mod boruta;
pub mod cli;
pub mod correlation;
pub mod data;
pub mod matrix;
pub mod models;
pub mod partition;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use boruta::{run_boruta, BlockStatus, BorutaConfig, BorutaOutcome, Status, TrialGranularity};
pub use correlation::{average_ranks, block_correlation, spearman, BlockCorrelationMatrix};
pub use data::{load_blocks, load_csv, Block, FeatureTable, PreliminaryBlocks};
pub use matrix::Matrix;
pub use models::{fit, grouped_kfold, predict_scores, roc_auc, ClassifierKind, ClassifierSpec, FittedModel, FoldPlan};
pub use partition::{brute_force_solve, solve, BlockPartition, PartitionProblem};
pub use pipeline::{consensus, run_study, ConsensusRule, SelectionReport};
