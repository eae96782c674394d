//! Full study: correlation grouping, per-classifier Boruta, consensus,
//! reduced-set retraining and single-block ablation.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boruta::{run_boruta, BorutaConfig, BorutaError, BorutaOutcome, Status};
use crate::correlation::{block_correlation, BlockCorrelationMatrix, CorrelationError};
use crate::data::{Block, DataError, FeatureTable, PreliminaryBlocks};
use crate::models::{self, grouped_kfold, predict_scores, roc_auc, ClassifierSpec, FoldPlan, ModelError};
use crate::partition::{solve, BlockPartition, PartitionError, PartitionProblem};
use crate::stats::{self, Direction, StatsError, TestResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no classifiers given")]
    NoClassifiers,
    #[error("classifier {label}: {source}")]
    Classifier {
        label: String,
        #[source]
        source: BorutaError,
    },
    #[error("outcomes cover different block sets")]
    BlockSetMismatch,
    #[error("empty block set")]
    EmptyBlockSet,
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusRule {
    Unanimous,
    /// Accepted by strictly more than half of the classifiers.
    Majority,
}

impl std::str::FromStr for ConsensusRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unanimous" => Ok(ConsensusRule::Unanimous),
            "majority" => Ok(ConsensusRule::Majority),
            other => Err(format!("unknown consensus rule `{other}` (expected unanimous or majority)")),
        }
    }
}

/// Blocks accepted under `rule`, in the outcomes' block order.
pub fn consensus(outcomes: &[BorutaOutcome], rule: ConsensusRule) -> Result<Vec<String>, PipelineError> {
    let rows = consensus_rows(outcomes, &labels_for(outcomes))?;
    let n = outcomes.len();
    Ok(rows
        .into_iter()
        .filter(|r| match rule {
            ConsensusRule::Unanimous => r.selected_by.len() == n,
            ConsensusRule::Majority => 2 * r.selected_by.len() > n,
        })
        .map(|r| r.block)
        .collect())
}

fn labels_for(outcomes: &[BorutaOutcome]) -> Vec<String> {
    classifier_labels(&outcomes.iter().map(|o| o.classifier.clone()).collect::<Vec<_>>())
}

/// Short names, with `#2`, `#3`, ... appended to repeats.
pub fn classifier_labels(specs: &[ClassifierSpec]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    specs
        .iter()
        .map(|s| {
            let name = s.kind.short_name();
            let count = seen.entry(name).or_default();
            *count += 1;
            if *count == 1 {
                name.to_string()
            } else {
                format!("{name}#{count}")
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRow {
    pub block: String,
    pub selected_by: Vec<String>,
    pub fraction: f64,
}

fn consensus_rows(outcomes: &[BorutaOutcome], labels: &[String]) -> Result<Vec<ConsensusRow>, PipelineError> {
    let Some(first) = outcomes.first() else {
        return Err(PipelineError::NoClassifiers);
    };
    let names: Vec<&str> = first.blocks.iter().map(|b| b.name.as_str()).collect();
    let reference: HashSet<&str> = names.iter().copied().collect();
    for o in outcomes {
        let set: HashSet<&str> = o.blocks.iter().map(|b| b.name.as_str()).collect();
        if set != reference || o.blocks.len() != names.len() {
            return Err(PipelineError::BlockSetMismatch);
        }
    }
    Ok(names
        .iter()
        .map(|&name| {
            let selected_by: Vec<String> = outcomes
                .iter()
                .zip(labels)
                .filter(|(o, _)| o.status_of(name).is_some_and(|s| s.status == Status::Accepted))
                .map(|(_, l)| l.clone())
                .collect();
            ConsensusRow {
                block: name.to_string(),
                fraction: selected_by.len() as f64 / outcomes.len() as f64,
                selected_by,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTable {
    pub rows: Vec<ConsensusRow>,
    pub unanimous: Vec<String>,
    pub majority: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub sd: f64,
    pub per_fold: Vec<f64>,
}

impl AucSummary {
    fn from_folds(per_fold: Vec<f64>) -> AucSummary {
        let n = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / n;
        let sd = if per_fold.len() > 1 {
            (per_fold.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        AucSummary { mean, sd, per_fold }
    }
}

/// Held-out AUC per fold of `spec` trained on `columns`. Folds whose training
/// or test split is single-class yield `None`.
pub fn fold_aucs(
    table: &FeatureTable,
    columns: &[usize],
    spec: &ClassifierSpec,
    plan: &FoldPlan,
) -> Result<Vec<Option<f64>>, ModelError> {
    let x = table.values().select_columns(columns);
    let y = table.labels();
    (0..plan.k())
        .into_par_iter()
        .map(|fold| {
            let train = plan.train_rows(fold);
            let test = plan.test_rows(fold);
            let y_tr: Vec<u8> = train.iter().map(|&r| y[r]).collect();
            let y_te: Vec<u8> = test.iter().map(|&r| y[r]).collect();
            if y_tr.iter().all(|&v| v == y_tr[0]) || y_te.iter().all(|&v| v == y_te[0]) {
                return Ok(None);
            }
            let model = models::fit(spec, &x.select_rows(&train), &y_tr)?;
            let scores = predict_scores(&model, &x.select_rows(test))?;
            roc_auc(&scores, &y_te).map(Some)
        })
        .collect()
}

fn resolve_columns(table: &FeatureTable, blocks: &[&Block]) -> Result<Vec<usize>, DataError> {
    let mut cols = Vec::new();
    for b in blocks {
        cols.extend(b.columns(table)?);
    }
    Ok(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedComparison {
    pub classifier: String,
    pub full: AucSummary,
    pub reduced: AucSummary,
    /// One-tailed paired t-test of reduced against full, direction `greater`.
    pub paired_t: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedEvaluation {
    /// Consensus rule that produced the reduced set; `None` for an explicit list.
    pub rule: Option<ConsensusRule>,
    pub reduced_blocks: Vec<String>,
    pub skipped: bool,
    pub skip_reason: Option<String>,
    pub comparisons: Vec<ReducedComparison>,
}

/// Compares full-set and reduced-set AUC for each spec on `plan`. Folds that
/// one of the two sets cannot score are dropped from both.
pub fn evaluate_reduced(
    table: &FeatureTable,
    all_blocks: &[Block],
    reduced: &[String],
    specs: &[ClassifierSpec],
    labels: &[String],
    plan: &FoldPlan,
    rule: Option<ConsensusRule>,
) -> Result<ReducedEvaluation, PipelineError> {
    if reduced.is_empty() {
        return Ok(ReducedEvaluation {
            rule,
            reduced_blocks: Vec::new(),
            skipped: true,
            skip_reason: Some("reduced block set is empty".into()),
            comparisons: Vec::new(),
        });
    }
    let full_cols = resolve_columns(table, &all_blocks.iter().collect::<Vec<_>>())?;
    let chosen: Vec<&Block> = reduced
        .iter()
        .map(|name| all_blocks.iter().find(|b| &b.name == name).ok_or_else(|| PipelineError::UnknownBlock(name.clone())))
        .collect::<Result<_, _>>()?;
    let reduced_cols = resolve_columns(table, &chosen)?;
    let mut comparisons = Vec::with_capacity(specs.len());
    for (spec, label) in specs.iter().zip(labels) {
        let full = fold_aucs(table, &full_cols, spec, plan)?;
        let red = fold_aucs(table, &reduced_cols, spec, plan)?;
        let (f, r): (Vec<f64>, Vec<f64>) = full.iter().zip(&red).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
        let paired_t = stats::paired_t_one_tailed(&r, &f, Direction::Greater)?;
        comparisons.push(ReducedComparison {
            classifier: label.clone(),
            full: AucSummary::from_folds(f),
            reduced: AucSummary::from_folds(r),
            paired_t,
        });
    }
    Ok(ReducedEvaluation { rule, reduced_blocks: reduced.to_vec(), skipped: false, skip_reason: None, comparisons })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub block: String,
    pub auc: AucSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub classifier: String,
    pub rows: Vec<AblationRow>,
    /// All given blocks together.
    pub baseline: AucSummary,
}

/// Grouped k-fold AUC of `spec` trained on each block alone, plus all blocks
/// together.
pub fn ablation_auc(
    table: &FeatureTable,
    blocks: &[Block],
    spec: &ClassifierSpec,
    label: &str,
    plan: &FoldPlan,
) -> Result<Ablation, PipelineError> {
    if blocks.is_empty() {
        return Err(PipelineError::EmptyBlockSet);
    }
    let summarize = |cols: &[usize]| -> Result<AucSummary, PipelineError> {
        let aucs: Vec<f64> = fold_aucs(table, cols, spec, plan)?.into_iter().flatten().collect();
        if aucs.is_empty() {
            return Err(ModelError::SingleClass.into());
        }
        Ok(AucSummary::from_folds(aucs))
    };
    let mut rows = Vec::with_capacity(blocks.len());
    for b in blocks {
        rows.push(AblationRow { block: b.name.clone(), auc: summarize(&b.columns(table)?)? });
    }
    let baseline = summarize(&resolve_columns(table, &blocks.iter().collect::<Vec<_>>())?)?;
    Ok(Ablation { classifier: label.to_string(), rows, baseline })
}

/// Merges each partition group into one block named by joining its members
/// with `+`; a singleton group keeps its block unchanged.
pub fn merge_blocks(prelim: &PreliminaryBlocks, partition: &BlockPartition) -> Vec<Block> {
    partition
        .groups
        .iter()
        .map(|group| {
            let members: Vec<&Block> = group.iter().filter_map(|n| prelim.get(n)).collect();
            Block {
                name: group.join("+"),
                features: members.iter().flat_map(|b| b.features.iter().cloned()).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub tau: f64,
    pub consensus: ConsensusRule,
    pub boruta: BorutaConfig,
    pub evaluation_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRun {
    pub label: String,
    pub outcome: BorutaOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlans {
    pub boruta: Vec<Vec<String>>,
    pub evaluation: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema: u32,
    pub config: StudyConfig,
    pub correlation: BlockCorrelationMatrix,
    pub partition: BlockPartition,
    pub blocks: Vec<Block>,
    pub classifiers: Vec<ClassifierRun>,
    pub consensus: ConsensusTable,
    pub evaluation: ReducedEvaluation,
    pub ablation: Vec<Ablation>,
    pub fold_plans: FoldPlans,
}

pub fn run_study(
    table: &FeatureTable,
    prelim: &PreliminaryBlocks,
    specs: &[ClassifierSpec],
    config: &BorutaConfig,
    tau: f64,
    rule: ConsensusRule,
) -> Result<SelectionReport, PipelineError> {
    if specs.is_empty() {
        return Err(PipelineError::NoClassifiers);
    }
    let correlation = block_correlation(table, prelim)?;
    let partition = solve(&PartitionProblem::new(correlation.clone(), tau)?);
    let blocks = merge_blocks(prelim, &partition);
    let labels = classifier_labels(specs);

    let outcomes: Vec<BorutaOutcome> = specs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(spec, label)| {
            log::info!("running boruta with {label}");
            run_boruta(table, &blocks, spec, config)
                .map_err(|source| PipelineError::Classifier { label: label.clone(), source })
        })
        .collect::<Result<_, _>>()?;

    let rows = consensus_rows(&outcomes, &labels)?;
    let unanimous = consensus(&outcomes, ConsensusRule::Unanimous)?;
    let majority = consensus(&outcomes, ConsensusRule::Majority)?;
    let reduced = match rule {
        ConsensusRule::Unanimous => unanimous.clone(),
        ConsensusRule::Majority => majority.clone(),
    };

    let evaluation_seed = config.seed.wrapping_add(1);
    let boruta_plan = grouped_kfold(table.group_ids(), config.k_folds, config.seed)?;
    let eval_plan = grouped_kfold(table.group_ids(), config.k_folds, evaluation_seed)?;
    let evaluation = evaluate_reduced(table, &blocks, &reduced, specs, &labels, &eval_plan, Some(rule))?;

    let mut ablation = Vec::new();
    if !reduced.is_empty() {
        let chosen: Vec<Block> = blocks.iter().filter(|b| reduced.contains(&b.name)).cloned().collect();
        for (spec, label) in specs.iter().zip(&labels) {
            ablation.push(ablation_auc(table, &chosen, spec, label, &eval_plan)?);
        }
    }

    Ok(SelectionReport {
        schema: SCHEMA_VERSION,
        config: StudyConfig { tau, consensus: rule, boruta: config.clone(), evaluation_seed },
        correlation,
        partition,
        blocks,
        classifiers: labels.into_iter().zip(outcomes).map(|(label, outcome)| ClassifierRun { label, outcome }).collect(),
        consensus: ConsensusTable { rows, unanimous, majority },
        evaluation,
        ablation,
        fold_plans: FoldPlans { boruta: boruta_plan.fold_groups, evaluation: eval_plan.fold_groups },
    })
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Accepted => "accepted",
        Status::Rejected => "rejected",
        Status::Tentative => "tentative",
        Status::TentativeExpired => "expired",
    }
}

impl SelectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text tables: selection frequency, classification performance
    /// and ablation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "tau {}  alpha {}  folds {}  repeats {}  iterations {}  seed {}  consensus {:?}",
            c.tau, c.boruta.alpha, c.boruta.k_folds, c.boruta.repeats_per_fold, c.boruta.max_iterations, c.boruta.seed, c.consensus
        );
        let _ = writeln!(out, "blocks: {}", self.blocks.len());
        let _ = writeln!(out);

        let _ = writeln!(out, "Feature selection frequency");
        let width = self.consensus.rows.iter().map(|r| r.block.len()).max().unwrap_or(5).max(5);
        let mut header = format!("{:<width$}", "block");
        for run in &self.classifiers {
            let _ = write!(header, "  {:>9}", run.label);
        }
        header.push_str("  selection");
        let _ = writeln!(out, "{header}");
        for row in &self.consensus.rows {
            let mut line = format!("{:<width$}", row.block);
            for run in &self.classifiers {
                let status = run.outcome.status_of(&row.block).map_or("-", |s| status_word(s.status));
                let _ = write!(line, "  {status:>9}");
            }
            let _ = write!(line, "  {:>8.1}%", 100.0 * row.fraction);
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "unanimous: {}", self.consensus.unanimous.join(", "));
        let _ = writeln!(out, "majority: {}", self.consensus.majority.join(", "));
        let _ = writeln!(out);

        let _ = writeln!(out, "Classification performance (mean AUC +/- sd)");
        if self.evaluation.skipped {
            let _ = writeln!(out, "skipped: {}", self.evaluation.skip_reason.as_deref().unwrap_or(""));
        } else {
            let _ = writeln!(out, "{:<10}  {:>17}  {:>17}  {:>8}", "classifier", "full", "reduced", "p");
            for cmp in &self.evaluation.comparisons {
                let _ = writeln!(
                    out,
                    "{:<10}  {:>8.4} +/- {:.4}  {:>8.4} +/- {:.4}  {:>8.4}",
                    cmp.classifier, cmp.full.mean, cmp.full.sd, cmp.reduced.mean, cmp.reduced.sd, cmp.paired_t.p_value
                );
            }
        }
        for ab in &self.ablation {
            let _ = writeln!(out);
            let _ = writeln!(out, "Single-block AUC ({})", ab.classifier);
            for row in &ab.rows {
                let _ = writeln!(out, "{:<width$}  {:.4} +/- {:.4}", row.block, row.auc.mean, row.auc.sd);
            }
            let _ = writeln!(out, "{:<width$}  {:.4} +/- {:.4}", "all", ab.baseline.mean, ab.baseline.sd);
        }
        out
    }
}
