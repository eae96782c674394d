//! Threshold-constrained weighted clique partitioning.
//!
//! Blocks `i` and `j` may share a group only if `S[i][j] >= tau`, and every
//! group must be a clique under that rule. Among feasible partitions the
//! solver maximizes the sum of `S` over within-group pairs.
//!
//! The threshold graph is split into connected components, which never
//! interact. Components of up to [`EXACT_COMPONENT_LIMIT`] blocks are solved
//! exactly by branch and bound; larger ones fall back to greedy agglomeration
//! and the result is flagged as inexact.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::BlockCorrelationMatrix;

pub const DEFAULT_TAU: f64 = 0.6;
pub const EXACT_COMPONENT_LIMIT: usize = 16;
pub const BRUTE_FORCE_LIMIT: usize = 12;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid correlation matrix: {0}")]
    InvalidMatrix(String),
    #[error("brute force is limited to {BRUTE_FORCE_LIMIT} blocks, got {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionProblem {
    matrix: BlockCorrelationMatrix,
    tau: f64,
}

impl PartitionProblem {
    pub fn new(matrix: BlockCorrelationMatrix, tau: f64) -> Result<Self, PartitionError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(PartitionError::InvalidThreshold(tau));
        }
        let n = matrix.len();
        for i in 0..n {
            if matrix.values[i].len() != n {
                return Err(PartitionError::InvalidMatrix(format!("row {i} has {} entries, expected {n}", matrix.values[i].len())));
            }
            for j in 0..n {
                let v = matrix.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(PartitionError::InvalidMatrix(format!("S[{i}][{j}] = {v} outside [0, 1]")));
                }
                if v != matrix.get(j, i) {
                    return Err(PartitionError::InvalidMatrix(format!("S is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(PartitionProblem { matrix, tau })
    }

    pub fn matrix(&self) -> &BlockCorrelationMatrix {
        &self.matrix
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn len(&self) -> usize {
        self.matrix.len()
    }

    #[inline]
    fn feasible(&self, i: usize, j: usize) -> bool {
        self.matrix.get(i, j) >= self.tau
    }
}

/// Disjoint groups of block names covering every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub groups: Vec<Vec<String>>,
    pub objective: f64,
    pub exact: bool,
}

type IndexPartition = Vec<Vec<usize>>;

/// Sorts members, then groups by their smallest member.
fn canonicalize(mut groups: IndexPartition) -> IndexPartition {
    groups.retain(|g| !g.is_empty());
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    groups
}

/// Within-group pair sum, accumulated in canonical order so that equal
/// partitions always yield bit-identical objectives.
fn objective(problem: &PartitionProblem, groups: &IndexPartition) -> f64 {
    let mut total = 0.0;
    for g in groups {
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                total += problem.matrix.get(i, j);
            }
        }
    }
    total
}

fn is_feasible(problem: &PartitionProblem, groups: &IndexPartition) -> bool {
    groups.iter().all(|g| g.iter().enumerate().all(|(a, &i)| g[a + 1..].iter().all(|&j| problem.feasible(i, j))))
}

fn to_named(problem: &PartitionProblem, groups: IndexPartition, exact: bool) -> BlockPartition {
    let groups = canonicalize(groups);
    let objective = objective(problem, &groups);
    BlockPartition {
        groups: groups
            .iter()
            .map(|g| g.iter().map(|&i| problem.matrix.block_names[i].clone()).collect())
            .collect(),
        objective,
        exact,
    }
}

/// Returns true when `(value, groups)` should replace the incumbent.
fn better(value: f64, groups: &IndexPartition, best_value: f64, best: &IndexPartition) -> bool {
    if value > best_value + TIE_EPS {
        return true;
    }
    (value - best_value).abs() <= TIE_EPS && groups.cmp(best) == Ordering::Less
}

fn components(problem: &PartitionProblem) -> Vec<Vec<usize>> {
    let n = problem.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && v != u && problem.feasible(u, v) {
                    seen[v] = true;
                    comp.push(v);
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Repeatedly merges the pair of groups with the largest feasible gain.
fn greedy(problem: &PartitionProblem, vertices: &[usize]) -> IndexPartition {
    let mut groups: IndexPartition = vertices.iter().map(|&v| vec![v]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let mut gain = 0.0;
                let mut ok = true;
                'pairs: for &i in &groups[a] {
                    for &j in &groups[b] {
                        if !problem.feasible(i, j) {
                            ok = false;
                            break 'pairs;
                        }
                        gain += problem.matrix.get(i, j);
                    }
                }
                if ok && gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, a, b));
                }
            }
        }
        match best {
            Some((_, a, b)) => {
                let merged = groups.remove(b);
                groups[a].extend(merged);
            }
            None => return canonicalize(groups),
        }
    }
}

struct BranchAndBound<'a> {
    problem: &'a PartitionProblem,
    /// Global vertex ids in branching order.
    order: Vec<usize>,
    /// Sum of feasible weights over pairs inside `order[t..]`.
    suffix_pairs: Vec<f64>,
    groups: IndexPartition,
    best_value: f64,
    best: IndexPartition,
}

impl BranchAndBound<'_> {
    fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.problem.feasible(i, j).then(|| self.problem.matrix.get(i, j))
    }

    /// Gain of adding `v` to group `g`, or `None` if infeasible.
    fn join_gain(&self, v: usize, g: &[usize]) -> Option<f64> {
        g.iter().try_fold(0.0, |acc, &u| self.weight(u, v).map(|w| acc + w))
    }

    fn bound(&self, t: usize, current: f64) -> f64 {
        let mut b = current + self.suffix_pairs[t];
        for &v in &self.order[t..] {
            let best_join = self.groups.iter().filter_map(|g| self.join_gain(v, g)).fold(0.0, f64::max);
            b += best_join;
        }
        b
    }

    fn search(&mut self, t: usize, current: f64) {
        if t == self.order.len() {
            let cand = canonicalize(self.groups.clone());
            // Recompute in canonical order for a reproducible comparison.
            let value = objective(self.problem, &cand);
            if better(value, &cand, self.best_value, &self.best) {
                self.best_value = value;
                self.best = cand;
            }
            return;
        }
        if self.bound(t, current) < self.best_value - TIE_EPS {
            return;
        }
        let v = self.order[t];
        let mut options: Vec<(f64, Option<usize>)> = self
            .groups
            .iter()
            .enumerate()
            .filter_map(|(k, g)| self.join_gain(v, g).map(|gain| (gain, Some(k))))
            .collect();
        options.push((0.0, None));
        options.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (gain, target) in options {
            match target {
                Some(k) => {
                    self.groups[k].push(v);
                    self.search(t + 1, current + gain);
                    self.groups[k].pop();
                }
                None => {
                    self.groups.push(vec![v]);
                    self.search(t + 1, current);
                    self.groups.pop();
                }
            }
        }
    }
}

fn exact_component(problem: &PartitionProblem, vertices: &[usize]) -> IndexPartition {
    let incumbent = greedy(problem, vertices);
    let incumbent_value = objective(problem, &incumbent);

    // Heaviest vertices first tightens the bound early.
    let mut order = vertices.to_vec();
    let strength = |v: usize| -> f64 {
        vertices.iter().filter(|&&u| u != v && problem.feasible(u, v)).map(|&u| problem.matrix.get(u, v)).sum()
    };
    order.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)).then(a.cmp(&b)));

    let m = order.len();
    let mut suffix_pairs = vec![0.0; m + 1];
    for t in (0..m).rev() {
        let v = order[t];
        let add: f64 = order[t + 1..]
            .iter()
            .filter(|&&u| problem.feasible(u, v))
            .map(|&u| problem.matrix.get(u, v))
            .sum();
        suffix_pairs[t] = suffix_pairs[t + 1] + add;
    }

    let mut bb = BranchAndBound {
        problem,
        order,
        suffix_pairs,
        groups: Vec::new(),
        best_value: incumbent_value,
        best: incumbent,
    };
    bb.search(0, 0.0);
    bb.best
}

/// Solves with the default exact-component limit.
pub fn solve(problem: &PartitionProblem) -> BlockPartition {
    solve_with_limit(problem, EXACT_COMPONENT_LIMIT)
}

pub fn solve_with_limit(problem: &PartitionProblem, exact_component_limit: usize) -> BlockPartition {
    let mut groups = Vec::new();
    let mut exact = true;
    for comp in components(problem) {
        if comp.len() == 1 {
            groups.push(comp);
        } else if comp.len() <= exact_component_limit {
            groups.extend(exact_component(problem, &comp));
        } else {
            exact = false;
            groups.extend(greedy(problem, &comp));
        }
    }
    debug_assert!(is_feasible(problem, &groups));
    to_named(problem, groups, exact)
}

/// Enumerates every set partition (restricted growth strings) and returns the
/// best feasible one. Test oracle; limited to [`BRUTE_FORCE_LIMIT`] blocks.
pub fn brute_force_solve(problem: &PartitionProblem) -> Result<BlockPartition, PartitionError> {
    let n = problem.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PartitionError::TooLarge(n));
    }
    if n == 0 {
        return Ok(to_named(problem, Vec::new(), true));
    }
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, IndexPartition)> = None;
    loop {
        let k = labels.iter().max().copied().unwrap_or(0) + 1;
        let mut groups: IndexPartition = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        if is_feasible(problem, &groups) {
            let groups = canonicalize(groups);
            let value = objective(problem, &groups);
            let replace = match &best {
                None => true,
                Some((bv, bg)) => better(value, &groups, *bv, bg),
            };
            if replace {
                best = Some((value, groups));
            }
        }
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                let (_, groups) = best.expect("the all-singleton partition is always feasible");
                return Ok(to_named(problem, groups, true));
            }
            let prefix_max = labels[..i].iter().max().copied().unwrap_or(0);
            if labels[i] <= prefix_max {
                labels[i] += 1;
                for l in &mut labels[i + 1..] {
                    *l = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}
