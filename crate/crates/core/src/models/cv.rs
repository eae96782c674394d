use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::seed;

/// Grouped k-fold assignment: every group lives in exactly one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Row indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Group ids per fold, in dealing order.
    pub fold_groups: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test_rows(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// All rows outside `fold`, ascending.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> =
            self.folds.iter().enumerate().filter(|(f, _)| *f != fold).flat_map(|(_, r)| r.iter().copied()).collect();
        rows.sort_unstable();
        rows
    }
}

/// Shuffles the distinct groups with `seed` and deals them round-robin.
pub fn grouped_kfold(group_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidFoldCount(k));
    }
    let mut rows_of: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, g) in group_ids.iter().enumerate() {
        rows_of.entry(g.as_str()).or_default().push(r);
    }
    if rows_of.len() < k {
        return Err(ModelError::TooFewGroups { groups: rows_of.len(), k });
    }
    let mut groups: Vec<&str> = rows_of.keys().copied().collect();
    groups.shuffle(&mut seed::rng(seed, &[seed::TAG_FOLDS]));

    let mut folds = vec![Vec::new(); k];
    let mut fold_groups = vec![Vec::new(); k];
    for (i, g) in groups.iter().enumerate() {
        folds[i % k].extend_from_slice(&rows_of[g]);
        fold_groups[i % k].push(g.to_string());
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { folds, fold_groups })
}
