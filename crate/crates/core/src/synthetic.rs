//! Seeded datasets with known block-level ground truth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Block, FeatureTable, PreliminaryBlocks};
use crate::matrix::Matrix;
use crate::seed;

/// Share of a block factor's variance that is shared by all rows of a group.
pub const GROUP_EFFECT_SHARE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
#[error("invalid synthetic spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantBlock {
    pub size: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_groups: usize,
    pub obs_per_group: usize,
    pub relevant_blocks: Vec<RelevantBlock>,
    pub noise_blocks: Vec<usize>,
    pub within_block_correlation: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Five relevant and ten noise blocks of three columns, 250 groups of two.
    fn default() -> Self {
        SyntheticSpec {
            n_groups: 250,
            obs_per_group: 2,
            relevant_blocks: vec![RelevantBlock { size: 3, beta: 1.0 }; 5],
            noise_blocks: vec![3; 10],
            within_block_correlation: 0.8,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), InvalidSpec> {
        if self.n_groups == 0 || self.obs_per_group == 0 {
            return Err(InvalidSpec("n_groups and obs_per_group must be positive".into()));
        }
        if self.relevant_blocks.is_empty() && self.noise_blocks.is_empty() {
            return Err(InvalidSpec("at least one block is required".into()));
        }
        if self.relevant_blocks.iter().any(|b| b.size == 0) || self.noise_blocks.contains(&0) {
            return Err(InvalidSpec("block sizes must be positive".into()));
        }
        if self.relevant_blocks.iter().any(|b| !(b.beta >= 0.0 && b.beta.is_finite())) {
            return Err(InvalidSpec("beta must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.within_block_correlation) {
            return Err(InvalidSpec("within_block_correlation must lie in [0, 1)".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(InvalidSpec("label_noise must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: FeatureTable,
    pub blocks: PreliminaryBlocks,
    /// Names of blocks whose factor enters the label model with β > 0.
    pub relevant: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Each block has a standard normal factor per row, made of a group part and
/// a row part; every column is `sqrt(c) * factor + sqrt(1 - c) * noise`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData, InvalidSpec> {
    spec.validate()?;
    let n = spec.n_groups * spec.obs_per_group;
    let mut rng = seed::rng(spec.seed, &[]);

    let mut layout: Vec<(String, usize, f64)> = Vec::new();
    for (i, b) in spec.relevant_blocks.iter().enumerate() {
        layout.push((format!("rel_{}", i + 1), b.size, b.beta));
    }
    for (i, &size) in spec.noise_blocks.iter().enumerate() {
        layout.push((format!("noise_{}", i + 1), size, 0.0));
    }

    let shared = GROUP_EFFECT_SHARE.sqrt();
    let own = (1.0 - GROUP_EFFECT_SHARE).sqrt();
    let mut factors = vec![vec![0.0; n]; layout.len()];
    for g in 0..spec.n_groups {
        for f in factors.iter_mut() {
            let group: f64 = rng.sample(StandardNormal);
            for o in 0..spec.obs_per_group {
                let eta: f64 = rng.sample(StandardNormal);
                f[g * spec.obs_per_group + o] = shared * group + own * eta;
            }
        }
    }

    let loading = spec.within_block_correlation.sqrt();
    let residual = (1.0 - spec.within_block_correlation).sqrt();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut blocks = Vec::new();
    for (b, (name, size, _)) in layout.iter().enumerate() {
        let mut features = Vec::with_capacity(*size);
        for c in 0..*size {
            let col_name = format!("{name}_c{}", c + 1);
            columns.push(
                factors[b].iter().map(|f| loading * f + residual * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>(),
            );
            names.push(col_name.clone());
            features.push(col_name);
        }
        blocks.push(Block { name: name.clone(), features });
    }

    let labels: Vec<u8> = (0..n)
        .map(|r| {
            let z: f64 = layout.iter().enumerate().map(|(b, (_, _, beta))| beta * factors[b][r]).sum();
            let mut y = rng.random::<f64>() < sigmoid(z);
            if rng.random::<f64>() < spec.label_noise {
                y = !y;
            }
            u8::from(y)
        })
        .collect();
    let group_ids = (0..n).map(|r| format!("g{:04}", r / spec.obs_per_group + 1)).collect();

    let table = FeatureTable::new(Matrix::from_columns(names, columns), labels, group_ids)
        .map_err(|e| InvalidSpec(e.to_string()))?;
    let relevant = layout.iter().filter(|(_, _, beta)| *beta > 0.0).map(|(name, _, _)| name.clone()).collect();
    let blocks = PreliminaryBlocks::from_mapping(blocks, &table).map_err(|e| InvalidSpec(e.to_string()))?;
    Ok(SyntheticData { table, blocks, relevant })
}
