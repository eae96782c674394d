//! Spearman rank correlation and max-pooled block correlation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, FeatureTable, PreliminaryBlocks};

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("empty vector")]
    EmptyVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("need at least two blocks, got {0}")]
    TooFewBlocks(usize),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Ranks starting at 1; ties get the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Result<Vec<f64>, CorrelationError> {
    if x.is_empty() {
        return Err(CorrelationError::EmptyVector);
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    Ok(ranks)
}

/// Result of a rank correlation. `constant_input` is set when either vector
/// has no variation, in which case `rho` is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    pub constant_input: bool,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    Ok(pearson_of_ranks(&average_ranks(x)?, &average_ranks(y)?))
}

fn pearson_of_ranks(rx: &[f64], ry: &[f64]) -> Spearman {
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Spearman { rho: 0.0, constant_input: true };
    }
    Spearman { rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0), constant_input: false }
}

/// Symmetric matrix of max-pooled absolute Spearman correlations between blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelationMatrix {
    pub block_names: Vec<String>,
    /// Row-major `n x n` values.
    pub values: Vec<Vec<f64>>,
    /// Block pairs whose pooled value involved a constant feature.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_pairs: Vec<(String, String)>,
}

impl BlockCorrelationMatrix {
    /// Builds a matrix from explicit values (used by tests and the partition
    /// solver's callers). Panics unless the matrix is square and matches the
    /// name count.
    pub fn from_values(block_names: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(block_names.len(), values.len());
        assert!(values.iter().all(|r| r.len() == values.len()));
        BlockCorrelationMatrix { block_names, values, constant_pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.block_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_names.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

pub fn block_correlation(table: &FeatureTable, blocks: &PreliminaryBlocks) -> Result<BlockCorrelationMatrix, CorrelationError> {
    let n = blocks.len();
    if n < 2 {
        return Err(CorrelationError::TooFewBlocks(n));
    }
    if table.n_rows() < 2 {
        return Err(CorrelationError::TooShort(table.n_rows()));
    }
    let values = table.values();
    let ranks: Vec<Vec<f64>> = (0..values.n_cols())
        .into_par_iter()
        .map(|c| average_ranks(values.column(c)))
        .collect::<Result<_, _>>()?;
    let columns: Vec<Vec<usize>> = blocks.blocks.iter().map(|b| b.columns(table)).collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let pooled: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut best = 0.0f64;
            let mut constant = false;
            for &f in &columns[i] {
                for &g in &columns[j] {
                    let s = pearson_of_ranks(&ranks[f], &ranks[g]);
                    constant |= s.constant_input;
                    best = best.max(s.rho.abs());
                }
            }
            (best, constant)
        })
        .collect();

    let mut matrix = vec![vec![0.0; n]; n];
    let mut constant_pairs = Vec::new();
    for (i, row) in matrix.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), &(v, constant)) in pairs.iter().zip(&pooled) {
        matrix[i][j] = v;
        matrix[j][i] = v;
        if constant {
            log::warn!("constant feature in blocks `{}` / `{}`; treated as uncorrelated", blocks.blocks[i].name, blocks.blocks[j].name);
            constant_pairs.push((blocks.blocks[i].name.clone(), blocks.blocks[j].name.clone()));
        }
    }
    Ok(BlockCorrelationMatrix { block_names: blocks.names(), values: matrix, constant_pairs })
}
