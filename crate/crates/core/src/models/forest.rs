use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{GiniTreeBuilder, Tree};
use crate::matrix::Matrix;
use crate::seed;

/// Shared by random forests and extra trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Candidate features per split; `None` means `ceil(sqrt(p))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 500, max_depth: None, max_features: None, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Random forests bootstrap rows and cut at the best threshold; extra
    /// trees (`randomized`) use every row and random thresholds.
    pub(crate) fn fit(params: &ForestParams, randomized: bool, x: &Matrix, y: &[u8], seed: u64) -> Forest {
        let p = x.n_cols();
        let max_features = params.max_features.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p);
        let builder = GiniTreeBuilder {
            x,
            y,
            max_features,
            random_thresholds: randomized,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        };
        let n = x.n_rows();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed, &[seed::TAG_MODEL, t as u64]);
                let mut samples: Vec<usize> = if randomized {
                    (0..n).collect()
                } else {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                };
                builder.build(&mut samples, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Mean class-1 leaf fraction over trees (the vote fraction when leaves
    /// are pure).
    pub(crate) fn predict(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.n_rows())
            .map(|r| self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>() / k)
            .collect()
    }
}
