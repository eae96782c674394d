//! Block-based Boruta.
//!
//! Each outer iteration builds one shadow matrix by jointly permuting every
//! active block's rows, then for every fold fits the classifier on
//! `[active | shadow]` training rows and measures held-out permutation
//! importance (AUC drop) for every real and shadow block. A real block scores
//! a hit whenever its importance beats the best shadow block in the same
//! comparison. Undecided blocks are then tested with an exact two-tailed
//! binomial test on their cumulative hits, Benjamini-Hochberg adjusted across
//! the undecided set.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Block, DataError, FeatureTable};
use crate::matrix::Matrix;
use crate::models::{self, grouped_kfold, predict_scores, roc_auc, ClassifierSpec, FittedModel, FoldPlan, ModelError};
use crate::seed;
use crate::stats::{self, StatsError};

pub const SHADOW_PREFIX: &str = "shadow::";

#[derive(Debug, Error)]
pub enum BorutaError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialGranularity {
    /// One Bernoulli trial per (fold, repeat) comparison.
    PerComparison,
    /// One trial per iteration, on importances averaged over folds and repeats.
    PerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaConfig {
    pub max_iterations: usize,
    pub repeats_per_fold: usize,
    pub k_folds: usize,
    pub alpha: f64,
    pub seed: u64,
    pub trial_granularity: TrialGranularity,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig {
            max_iterations: 50,
            repeats_per_fold: 3,
            k_folds: 5,
            alpha: 0.05,
            seed: 0,
            trial_granularity: TrialGranularity::PerComparison,
        }
    }
}

impl BorutaConfig {
    fn validate(&self) -> Result<(), BorutaError> {
        if self.repeats_per_fold == 0 {
            return Err(BorutaError::InvalidConfig("repeats_per_fold must be positive".into()));
        }
        if self.k_folds < 2 {
            return Err(BorutaError::InvalidConfig("k_folds must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BorutaError::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Accepted,
    Rejected,
    Tentative,
    TentativeExpired,
}

/// Final state of a block. Hits and trials cover every iteration in which the
/// block was active; p-values are those of the iteration that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStatus {
    pub name: String,
    pub status: Status,
    pub hits: u64,
    pub trials: u64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub decided_at_iteration: Option<usize>,
}

impl BlockStatus {
    pub fn hit_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Active block names (undecided and accepted) in input order.
    pub active: Vec<String>,
    /// Mean permutation importance of each active block.
    pub importances: Vec<f64>,
    /// Largest mean importance among shadow blocks.
    pub max_shadow_importance: f64,
    pub hits: Vec<u64>,
    pub trials: Vec<u64>,
    /// Folds skipped because a training or validation split was single-class.
    pub skipped_folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaOutcome {
    pub blocks: Vec<BlockStatus>,
    pub history: Vec<IterationRecord>,
    pub config: BorutaConfig,
    pub classifier: ClassifierSpec,
}

impl BorutaOutcome {
    pub fn accepted(&self) -> Vec<&str> {
        self.blocks.iter().filter(|b| b.status == Status::Accepted).map(|b| b.name.as_str()).collect()
    }

    pub fn status_of(&self, name: &str) -> Option<&BlockStatus> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Shadow copy of `x`: within each block all columns share one row
/// permutation; blocks use independent streams derived from `seed`.
///
/// Panics if `blocks` do not cover every column of `x`.
pub fn make_shadow(x: &Matrix, blocks: &[Vec<usize>], seed: u64) -> Matrix {
    let n = x.n_rows();
    let mut columns: Vec<Option<Vec<f64>>> = vec![None; x.n_cols()];
    for (b, cols) in blocks.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(seed, &[seed::TAG_SHADOW, b as u64]));
        for &c in cols {
            let src = x.column(c);
            columns[c] = Some(perm.iter().map(|&r| src[r]).collect());
        }
    }
    let names = x.names().iter().map(|n| format!("{SHADOW_PREFIX}{n}")).collect();
    let columns = columns.into_iter().map(|c| c.expect("blocks must cover every column")).collect();
    Matrix::from_columns(names, columns)
}

/// AUC drops for each repeat of jointly permuting `block` within `x_val`.
pub fn permutation_drops(
    model: &FittedModel,
    x_val: &Matrix,
    y_val: &[u8],
    block: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    let baseline = roc_auc(&predict_scores(model, x_val)?, y_val)?;
    let mut work = x_val.clone();
    drops_against(model, &mut work, y_val, block, repeats, seed, baseline)
}

fn drops_against(
    model: &FittedModel,
    work: &mut Matrix,
    y_val: &[u8],
    block: &[usize],
    repeats: usize,
    seed: u64,
    baseline: f64,
) -> Result<Vec<f64>, ModelError> {
    let n = work.n_rows();
    let saved: Vec<Vec<f64>> = block.iter().map(|&c| work.column(c).to_vec()).collect();
    let mut out = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(seed, &[r as u64]));
        for (k, &c) in block.iter().enumerate() {
            let dst = work.column_mut(c);
            for (i, &p) in perm.iter().enumerate() {
                dst[i] = saved[k][p];
            }
        }
        let auc = roc_auc(&predict_scores(model, work)?, y_val)?;
        out.push(baseline - auc);
    }
    for (k, &c) in block.iter().enumerate() {
        work.column_mut(c).copy_from_slice(&saved[k]);
    }
    Ok(out)
}

/// Baseline AUC minus the mean AUC after jointly permuting `block`.
pub fn block_permutation_importance(
    model: &FittedModel,
    x_val: &Matrix,
    y_val: &[u8],
    block: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<f64, ModelError> {
    let drops = permutation_drops(model, x_val, y_val, block, repeats.max(1), seed)?;
    Ok(drops.iter().sum::<f64>() / drops.len() as f64)
}

/// A block taking part in an iteration, with its table columns.
#[derive(Debug, Clone)]
pub struct ActiveBlock {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Trials gathered for the active blocks in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrials {
    pub hits: Vec<u64>,
    pub trials: Vec<u64>,
    pub importances: Vec<f64>,
    pub max_shadow_importance: f64,
    pub skipped_folds: Vec<usize>,
}

struct FoldDrops {
    /// `[unit][repeat]`; units are the real blocks followed by their shadows.
    drops: Vec<Vec<f64>>,
}

pub fn run_iteration(
    table: &FeatureTable,
    active: &[ActiveBlock],
    spec: &ClassifierSpec,
    plan: &FoldPlan,
    config: &BorutaConfig,
    iteration: usize,
) -> Result<IterationTrials, BorutaError> {
    let n_blocks = active.len();
    if n_blocks == 0 {
        return Err(BorutaError::InvalidConfig("no active blocks".into()));
    }
    let table_columns: Vec<usize> = active.iter().flat_map(|b| b.columns.iter().copied()).collect();
    let real = table.values().select_columns(&table_columns);
    let p = real.n_cols();
    let mut local_blocks = Vec::with_capacity(n_blocks);
    let mut offset = 0;
    for b in active {
        local_blocks.push((offset..offset + b.columns.len()).collect::<Vec<_>>());
        offset += b.columns.len();
    }
    let shadow = make_shadow(&real, &local_blocks, seed::derive(config.seed, &[seed::TAG_SHADOW, iteration as u64]));
    let extended = real.hstack(&shadow);
    let units: Vec<Vec<usize>> = local_blocks
        .iter()
        .cloned()
        .chain(local_blocks.iter().map(|cols| cols.iter().map(|c| c + p).collect()))
        .collect();

    let labels = table.labels();
    let repeats = config.repeats_per_fold;
    let per_fold: Vec<Option<FoldDrops>> = (0..plan.k())
        .into_par_iter()
        .map(|fold| -> Result<Option<FoldDrops>, BorutaError> {
            let train = plan.train_rows(fold);
            let test = plan.test_rows(fold);
            let y_train: Vec<u8> = train.iter().map(|&r| labels[r]).collect();
            let y_val: Vec<u8> = test.iter().map(|&r| labels[r]).collect();
            if is_single_class(&y_train) || is_single_class(&y_val) {
                log::warn!("iteration {iteration}: fold {fold} has a single-class split; skipped");
                return Ok(None);
            }
            let fold_spec = spec.with_seed(seed::derive(spec.seed, &[seed::TAG_MODEL, iteration as u64, fold as u64]));
            let model = models::fit(&fold_spec, &extended.select_rows(&train), &y_train)?;
            let mut x_val = extended.select_rows(test);
            let baseline = roc_auc(&predict_scores(&model, &x_val)?, &y_val)?;
            let drops = units
                .iter()
                .enumerate()
                .map(|(u, cols)| {
                    let s = seed::derive(config.seed, &[seed::TAG_PERMUTE, iteration as u64, fold as u64, u as u64]);
                    drops_against(&model, &mut x_val, &y_val, cols, repeats, s, baseline)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Some(FoldDrops { drops }))
        })
        .collect::<Result<_, _>>()?;

    let skipped_folds: Vec<usize> = per_fold.iter().enumerate().filter(|(_, f)| f.is_none()).map(|(i, _)| i).collect();
    let done: Vec<&FoldDrops> = per_fold.iter().flatten().collect();

    let mut hits = vec![0u64; n_blocks];
    let mut trials = vec![0u64; n_blocks];
    let mut mean = vec![0.0; 2 * n_blocks];
    let comparisons = (done.len() * repeats) as f64;
    for f in &done {
        for (u, d) in f.drops.iter().enumerate() {
            mean[u] += d.iter().sum::<f64>();
        }
    }
    if comparisons > 0.0 {
        mean.iter_mut().for_each(|m| *m /= comparisons);
    }
    let max_shadow_importance = mean[n_blocks..].iter().copied().fold(f64::NEG_INFINITY, f64::max);

    match config.trial_granularity {
        TrialGranularity::PerComparison => {
            for f in &done {
                for r in 0..repeats {
                    let best_shadow = f.drops[n_blocks..].iter().map(|d| d[r]).fold(f64::NEG_INFINITY, f64::max);
                    for b in 0..n_blocks {
                        trials[b] += 1;
                        if f.drops[b][r] > best_shadow {
                            hits[b] += 1;
                        }
                    }
                }
            }
        }
        TrialGranularity::PerIteration => {
            if !done.is_empty() {
                for b in 0..n_blocks {
                    trials[b] = 1;
                    hits[b] = u64::from(mean[b] > max_shadow_importance);
                }
            }
        }
    }

    Ok(IterationTrials {
        hits,
        trials,
        importances: mean[..n_blocks].to_vec(),
        max_shadow_importance: if done.is_empty() { 0.0 } else { max_shadow_importance },
        skipped_folds,
    })
}

fn is_single_class(y: &[u8]) -> bool {
    y.iter().all(|&v| v == y[0])
}

pub fn run_boruta(
    table: &FeatureTable,
    blocks: &[Block],
    spec: &ClassifierSpec,
    config: &BorutaConfig,
) -> Result<BorutaOutcome, BorutaError> {
    config.validate()?;
    if blocks.is_empty() {
        return Err(BorutaError::InvalidConfig("no blocks to test".into()));
    }
    if is_single_class(table.labels()) {
        return Err(ModelError::SingleClass.into());
    }
    let resolved: Vec<ActiveBlock> = blocks
        .iter()
        .map(|b| Ok(ActiveBlock { name: b.name.clone(), columns: b.columns(table)? }))
        .collect::<Result<_, DataError>>()?;
    let plan = grouped_kfold(table.group_ids(), config.k_folds, config.seed)?;

    let mut state: Vec<BlockStatus> = blocks
        .iter()
        .map(|b| BlockStatus {
            name: b.name.clone(),
            status: Status::Tentative,
            hits: 0,
            trials: 0,
            p_raw: 1.0,
            p_adjusted: 1.0,
            decided_at_iteration: None,
        })
        .collect();
    let mut history = Vec::new();

    for iteration in 1..=config.max_iterations {
        if !state.iter().any(|s| s.status == Status::Tentative) {
            break;
        }
        let active_idx: Vec<usize> =
            (0..state.len()).filter(|&i| matches!(state[i].status, Status::Tentative | Status::Accepted)).collect();
        let active: Vec<ActiveBlock> = active_idx.iter().map(|&i| resolved[i].clone()).collect();
        let trials = run_iteration(table, &active, spec, &plan, config, iteration)?;

        for (k, &i) in active_idx.iter().enumerate() {
            state[i].hits += trials.hits[k];
            state[i].trials += trials.trials[k];
        }
        let undecided: Vec<usize> = active_idx.iter().copied().filter(|&i| state[i].status == Status::Tentative).collect();
        let raw: Vec<f64> = undecided
            .iter()
            .map(|&i| {
                let s = &state[i];
                if s.trials == 0 {
                    Ok(1.0)
                } else {
                    stats::binom_two_tailed(s.hits, s.trials, 0.5).map(|t| t.p_value)
                }
            })
            .collect::<Result<_, _>>()?;
        let adjusted = stats::bh_adjust(&raw)?;
        for (k, &i) in undecided.iter().enumerate() {
            let s = &mut state[i];
            s.p_raw = raw[k];
            s.p_adjusted = adjusted[k];
            if adjusted[k] < config.alpha {
                let rate = s.hit_rate();
                if rate > 0.5 {
                    s.status = Status::Accepted;
                    s.decided_at_iteration = Some(iteration);
                } else if rate < 0.5 {
                    s.status = Status::Rejected;
                    s.decided_at_iteration = Some(iteration);
                }
            }
        }
        log::info!(
            "iteration {iteration}: {} accepted, {} rejected, {} tentative",
            state.iter().filter(|s| s.status == Status::Accepted).count(),
            state.iter().filter(|s| s.status == Status::Rejected).count(),
            state.iter().filter(|s| s.status == Status::Tentative).count()
        );
        history.push(IterationRecord {
            iteration,
            active: active.iter().map(|b| b.name.clone()).collect(),
            importances: trials.importances,
            max_shadow_importance: trials.max_shadow_importance,
            hits: trials.hits,
            trials: trials.trials,
            skipped_folds: trials.skipped_folds,
        });
    }
    for s in &mut state {
        if s.status == Status::Tentative {
            s.status = Status::TentativeExpired;
        }
    }
    Ok(BorutaOutcome { blocks: state, history, config: config.clone(), classifier: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ClassifierKind, Hyperparameters};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::collections::HashSet;

    fn fast_forest(seed: u64) -> ClassifierSpec {
        let mut spec = ClassifierSpec::new(ClassifierKind::RandomForest, seed);
        if let Hyperparameters::Forest(p) = &mut spec.params {
            p.n_trees = 50;
        }
        spec
    }

    /// `n` rows, one label-copy column `signal` plus `noise` standard normal
    /// columns, two rows per group.
    fn label_copy_table(n: usize, noise: usize, seed: u64) -> FeatureTable {
        let mut rng = seed::rng(seed, &[]);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut names = vec!["signal".to_string()];
        let mut cols = vec![labels.iter().map(|&l| f64::from(l)).collect::<Vec<_>>()];
        for j in 0..noise {
            names.push(format!("noise{j}"));
            cols.push((0..n).map(|_| rng.sample(StandardNormal)).collect());
        }
        let groups = (0..n).map(|r| format!("g{}", r / 2)).collect();
        FeatureTable::new(Matrix::from_columns(names, cols), labels, groups).unwrap()
    }

    fn singleton_blocks(t: &FeatureTable) -> Vec<Block> {
        t.feature_names().iter().map(|f| Block { name: f.clone(), features: vec![f.clone()] }).collect()
    }

    #[test]
    fn shadow_preserves_block_row_tuples() {
        let x = Matrix::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]]);
        for s in 0..30 {
            let sh = make_shadow(&x, &[vec![0, 1]], s);
            let mut rows: Vec<(i64, i64)> = (0..3).map(|r| (sh.get(r, 0) as i64, sh.get(r, 1) as i64)).collect();
            rows.sort();
            assert_eq!(rows, vec![(1, 10), (2, 20), (3, 30)]);
        }
        assert_eq!(make_shadow(&x, &[vec![0, 1]], 0).names()[0], "shadow::a");
    }

    #[test]
    fn shadow_single_column_preserves_multiset() {
        let x = Matrix::from_columns(vec!["a".into()], vec![vec![1.0, 2.0, 3.0]]);
        let sh = make_shadow(&x, &[vec![0]], 4);
        let mut v = sh.column(0).to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn singleton_blocks_get_independent_permutations() {
        let n = 12;
        let col: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = Matrix::from_columns(vec!["a".into(), "b".into()], vec![col.clone(), col]);
        let sh = make_shadow(&x, &[vec![0], vec![1]], 17);
        assert_ne!(sh.column(0), sh.column(1));
        // the same stream position reproduces the same draw
        let again = make_shadow(&x, &[vec![0], vec![1]], 17);
        assert_eq!(sh, again);
    }

    #[test]
    fn constant_block_has_zero_importance() {
        let t = label_copy_table(120, 2, 1);
        let mut cols = t.values().clone();
        cols.column_mut(2).iter_mut().for_each(|v| *v = 4.0);
        let m = models::fit(&fast_forest(1), &cols, t.labels()).unwrap();
        let imp = block_permutation_importance(&m, &cols, t.labels(), &[2], 3, 9).unwrap();
        assert!(imp.abs() < 1e-12);
    }

    #[test]
    fn sole_predictor_has_large_importance() {
        let t = label_copy_table(300, 3, 2);
        let train: Vec<usize> = (0..200).collect();
        let test: Vec<usize> = (200..300).collect();
        let y_tr: Vec<u8> = train.iter().map(|&r| t.labels()[r]).collect();
        let y_te: Vec<u8> = test.iter().map(|&r| t.labels()[r]).collect();
        let m = models::fit(&fast_forest(3), &t.values().select_rows(&train), &y_tr).unwrap();
        let x_te = t.values().select_rows(&test);
        assert!(block_permutation_importance(&m, &x_te, &y_te, &[0], 3, 1).unwrap() > 0.3);
    }

    #[test]
    fn more_repeats_reduce_noise_importance_variance() {
        let t = label_copy_table(300, 3, 5);
        let noise = t.values().select_columns(&[1, 2, 3]);
        let train: Vec<usize> = (0..200).collect();
        let test: Vec<usize> = (200..300).collect();
        let y_tr: Vec<u8> = train.iter().map(|&r| t.labels()[r]).collect();
        let y_te: Vec<u8> = test.iter().map(|&r| t.labels()[r]).collect();
        let m = models::fit(&fast_forest(3), &noise.select_rows(&train), &y_tr).unwrap();
        let x_te = noise.select_rows(&test);
        let spread = |repeats: usize| {
            let v: Vec<f64> =
                (0..40).map(|s| block_permutation_importance(&m, &x_te, &y_te, &[1], repeats, s).unwrap()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            assert!(mean.abs() < 0.05, "{mean}");
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
        };
        let (one, five) = (spread(1), spread(5));
        assert!(one > 0.0 && five < one, "{five} vs {one}");
    }

    #[test]
    fn iteration_counts_and_label_copy_hits() {
        let t = label_copy_table(200, 3, 3);
        let blocks = singleton_blocks(&t);
        let active: Vec<ActiveBlock> =
            blocks.iter().map(|b| ActiveBlock { name: b.name.clone(), columns: b.columns(&t).unwrap() }).collect();
        let config = BorutaConfig::default();
        let plan = grouped_kfold(t.group_ids(), 5, 0).unwrap();
        let tr = run_iteration(&t, &active, &fast_forest(0), &plan, &config, 1).unwrap();
        assert_eq!(tr.trials, vec![15; 4]);
        assert_eq!(tr.hits[0], 15);
        let only = run_iteration(&t, &active[1..2], &fast_forest(0), &plan, &config, 1).unwrap();
        assert_eq!(only.trials, vec![15]);
    }

    #[test]
    fn per_iteration_granularity_gives_one_trial() {
        let t = label_copy_table(120, 2, 3);
        let blocks = singleton_blocks(&t);
        let config = BorutaConfig { trial_granularity: TrialGranularity::PerIteration, max_iterations: 3, ..Default::default() };
        let out = run_boruta(&t, &blocks, &fast_forest(0), &config).unwrap();
        for rec in &out.history {
            assert!(rec.trials.iter().all(|&t| t == 1));
        }
    }

    #[test]
    fn zero_iterations_expire_everything() {
        let t = label_copy_table(60, 2, 3);
        let config = BorutaConfig { max_iterations: 0, ..Default::default() };
        let out = run_boruta(&t, &singleton_blocks(&t), &fast_forest(0), &config).unwrap();
        assert!(out.history.is_empty());
        assert!(out.blocks.iter().all(|b| b.status == Status::TentativeExpired && b.trials == 0));
    }

    #[test]
    fn label_copy_is_accepted_and_noise_dropped() {
        let t = label_copy_table(500, 9, 7);
        let out = run_boruta(&t, &singleton_blocks(&t), &fast_forest(11), &BorutaConfig::default()).unwrap();
        assert_eq!(out.status_of("signal").unwrap().status, Status::Accepted);
        let dropped = out.blocks[1..].iter().filter(|b| b.status != Status::Accepted).count();
        assert!(dropped >= 8);

        // lifecycle invariants
        assert!(out.history.len() <= out.config.max_iterations);
        let cfg = &out.config;
        for b in &out.blocks {
            assert!(b.hits <= b.trials);
            match b.status {
                Status::Accepted => assert!(b.p_adjusted < cfg.alpha && b.hit_rate() > 0.5),
                Status::Rejected => assert!(b.p_adjusted < cfg.alpha && b.hit_rate() < 0.5),
                Status::TentativeExpired => {}
                Status::Tentative => panic!("tentative after run"),
            }
            let active_iters: Vec<&IterationRecord> = out.history.iter().filter(|h| h.active.contains(&b.name)).collect();
            let skipped: u64 = active_iters.iter().map(|h| h.skipped_folds.len() as u64).sum();
            let expected = (active_iters.len() as u64 * cfg.k_folds as u64 - skipped) * cfg.repeats_per_fold as u64;
            assert_eq!(b.trials, expected);
        }
        // active set never grows
        for w in out.history.windows(2) {
            let prev: HashSet<&String> = w[0].active.iter().collect();
            assert!(w[1].active.iter().all(|a| prev.contains(a)));
        }
    }

    #[test]
    fn pure_noise_accepts_nothing() {
        let t = label_copy_table(300, 6, 8);
        let blocks: Vec<Block> = singleton_blocks(&t).into_iter().skip(1).collect();
        let out = run_boruta(&t, &blocks, &fast_forest(2), &BorutaConfig { max_iterations: 10, ..Default::default() }).unwrap();
        assert!(out.accepted().is_empty());
    }

    #[test]
    fn outcome_is_deterministic_across_thread_counts() {
        let t = label_copy_table(150, 4, 9);
        let blocks = singleton_blocks(&t);
        let config = BorutaConfig { max_iterations: 4, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_boruta(&t, &blocks, &fast_forest(4), &config).unwrap());
        let b = four.install(|| run_boruta(&t, &blocks, &fast_forest(4), &config).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn rejects_bad_config_and_single_class() {
        let t = label_copy_table(40, 1, 1);
        let blocks = singleton_blocks(&t);
        let bad = BorutaConfig { alpha: 0.0, ..Default::default() };
        assert!(matches!(run_boruta(&t, &blocks, &fast_forest(0), &bad), Err(BorutaError::InvalidConfig(_))));
        let one_class = FeatureTable::new(t.values().clone(), vec![1; 40], t.group_ids().to_vec()).unwrap();
        assert!(matches!(run_boruta(&one_class, &blocks, &fast_forest(0), &BorutaConfig::default()), Err(BorutaError::Model(ModelError::SingleClass))));
    }
}
