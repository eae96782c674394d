//! Gradient-boosted regression trees on the logistic loss.
//!
//! Trees are grown level by level with exact greedy split search over a
//! per-fit presorted column order, using second-order (Newton) gains with L2
//! leaf regularization.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::{Node, Tree};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    /// Fraction of columns drawn per tree.
    pub colsample: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            n_rounds: 300,
            learning_rate: 0.05,
            subsample: 0.8,
            colsample: 0.8,
            max_depth: 6,
            min_samples_leaf: 20,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BoostedTrees {
    base_score: f64,
    trees: Vec<Tree>,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BoostedTrees {
    pub(crate) fn fit(params: &BoostingParams, x: &Matrix, y: &[u8], seed: u64) -> BoostedTrees {
        let n = x.n_rows();
        let p = x.n_cols();
        let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        let base_score = (mean / (1.0 - mean)).ln();

        let sorted: Vec<Vec<u32>> = (0..p)
            .map(|f| {
                let col = x.column(f);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();

        let n_rows_round = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let n_cols_tree = ((params.colsample * p as f64).round() as usize).clamp(1, p);

        let mut margin = vec![base_score; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..p).collect();
        let mut trees = Vec::with_capacity(params.n_rounds);

        for round in 0..params.n_rounds {
            let mut rng = seed::rng(seed, &[seed::TAG_MODEL, round as u64]);
            for i in 0..n {
                let prob = sigmoid(margin[i]);
                grad[i] = prob - f64::from(y[i]);
                hess[i] = (prob * (1.0 - prob)).max(1e-16);
            }
            rows.shuffle(&mut rng);
            cols.shuffle(&mut rng);
            let mut features = cols[..n_cols_tree].to_vec();
            features.sort_unstable();

            let tree = grow_tree(params, x, &sorted, &grad, &hess, &rows[..n_rows_round], &features);
            for (i, m) in margin.iter_mut().enumerate() {
                *m += tree.predict_row(x, i);
            }
            trees.push(tree);
        }
        BoostedTrees { base_score, trees }
    }

    /// Log-odds scores.
    pub(crate) fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|r| self.base_score + self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>())
            .collect()
    }
}

fn leaf_objective(s: &Stats, lambda: f64) -> f64 {
    s.g * s.g / (s.h + lambda)
}

fn grow_tree(
    params: &BoostingParams,
    x: &Matrix,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    features: &[usize],
) -> Tree {
    const NONE: u32 = u32::MAX;
    let n = x.n_rows();
    let lambda = params.lambda;
    let min_leaf = params.min_samples_leaf;

    let mut node_of = vec![NONE; n];
    let mut root = Stats::default();
    for &r in rows {
        node_of[r] = 0;
        root.add(grad[r], hess[r]);
    }
    let mut nodes: Vec<Node> = vec![Node::Leaf(0.0)];
    let mut stats: Vec<Stats> = vec![root];
    let mut frontier: Vec<u32> = vec![0];

    for _depth in 0..params.max_depth {
        // slot of each frontier node, indexed by node id
        let mut slot = vec![NONE; nodes.len()];
        let expandable: Vec<u32> = frontier.iter().copied().filter(|&id| stats[id as usize].n >= 2 * min_leaf).collect();
        if expandable.is_empty() {
            break;
        }
        for (k, &id) in expandable.iter().enumerate() {
            slot[id as usize] = k as u32;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; expandable.len()];
        let mut left = vec![Stats::default(); expandable.len()];
        let mut last = vec![f64::NAN; expandable.len()];

        for &f in features {
            let col = x.column(f);
            left.iter_mut().for_each(|s| *s = Stats::default());
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &r in &sorted[f] {
                let r = r as usize;
                let id = node_of[r];
                if id == NONE {
                    continue;
                }
                let k = slot[id as usize];
                if k == NONE {
                    continue;
                }
                let k = k as usize;
                let v = col[r];
                let total = stats[expandable[k] as usize];
                let l = left[k];
                if l.n >= min_leaf && v > last[k] && total.n - l.n >= min_leaf {
                    let right = Stats { g: total.g - l.g, h: total.h - l.h, n: total.n - l.n };
                    let gain = 0.5 * (leaf_objective(&l, lambda) + leaf_objective(&right, lambda) - leaf_objective(&total, lambda));
                    if best[k].is_none_or(|b| gain > b.gain) {
                        let mut threshold = last[k] + (v - last[k]) / 2.0;
                        if threshold >= v {
                            threshold = last[k];
                        }
                        best[k] = Some(Candidate { gain, feature: f, threshold });
                    }
                }
                left[k].add(grad[r], hess[r]);
                last[k] = v;
            }
        }

        let mut next_frontier = Vec::new();
        let mut split_of = vec![None; nodes.len()];
        for (k, &id) in expandable.iter().enumerate() {
            if let Some(c) = best[k].filter(|c| c.gain > 1e-12) {
                let l = nodes.len() as u32;
                nodes.push(Node::Leaf(0.0));
                nodes.push(Node::Leaf(0.0));
                stats.push(Stats::default());
                stats.push(Stats::default());
                nodes[id as usize] = Node::Split { feature: c.feature as u32, threshold: c.threshold, left: l, right: l + 1 };
                split_of[id as usize] = Some((c.feature, c.threshold, l));
                next_frontier.push(l);
                next_frontier.push(l + 1);
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        for &r in rows {
            let id = node_of[r];
            if id == NONE {
                continue;
            }
            if let Some((f, thr, l)) = split_of.get(id as usize).copied().flatten() {
                let child = if x.get(r, f) <= thr { l } else { l + 1 };
                node_of[r] = child;
                stats[child as usize].add(grad[r], hess[r]);
            }
        }
        frontier = next_frontier;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf(w) = node {
            let s = stats[id];
            *w = -params.learning_rate * s.g / (s.h + lambda);
        }
    }
    Tree { nodes }
}
