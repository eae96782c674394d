use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Node {
    Leaf(f64),
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

/// Binary tree; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub(crate) fn predict_row(&self, x: &Matrix, row: usize) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x.get(row, feature as usize) <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }
}

/// Gini classification tree builder used by both forest variants.
pub(crate) struct GiniTreeBuilder<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
    /// Non-constant candidate features examined per split.
    pub max_features: usize,
    /// Random thresholds (extremely randomized trees) instead of the best cut.
    pub random_thresholds: bool,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl GiniTreeBuilder<'_> {
    /// Grows a tree on `samples` (indices may repeat, as in a bootstrap draw).
    pub(crate) fn build(&self, samples: &mut [usize], rng: &mut ChaCha8Rng) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut features: Vec<usize> = (0..self.x.n_cols()).collect();
        let mut buffer: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
        self.grow(&mut tree, samples, 0, &mut features, &mut buffer, rng);
        tree
    }

    fn grow(
        &self,
        tree: &mut Tree,
        samples: &mut [usize],
        depth: usize,
        features: &mut [usize],
        buffer: &mut Vec<(f64, u8)>,
        rng: &mut ChaCha8Rng,
    ) -> u32 {
        let id = tree.nodes.len() as u32;
        let n = samples.len();
        let pos = samples.iter().filter(|&&s| self.y[s] == 1).count();
        let leaf = Node::Leaf(pos as f64 / n as f64);
        tree.nodes.push(leaf);
        if pos == 0 || pos == n || n < 2 * self.min_samples_leaf || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(choice) = self.best_split(samples, pos, features, buffer, rng) else {
            return id;
        };
        let mut mid = 0;
        for i in 0..n {
            if self.x.get(samples[i], choice.feature) <= choice.threshold {
                samples.swap(i, mid);
                mid += 1;
            }
        }
        let (left_samples, right_samples) = samples.split_at_mut(mid);
        let left = self.grow(tree, left_samples, depth + 1, features, buffer, rng);
        let right = self.grow(tree, right_samples, depth + 1, features, buffer, rng);
        tree.nodes[id as usize] = Node::Split { feature: choice.feature as u32, threshold: choice.threshold, left, right };
        id
    }

    fn best_split(
        &self,
        samples: &[usize],
        pos: usize,
        features: &mut [usize],
        buffer: &mut Vec<(f64, u8)>,
        rng: &mut ChaCha8Rng,
    ) -> Option<SplitChoice> {
        let p = features.len();
        let mut best: Option<SplitChoice> = None;
        let mut visited = 0;
        for k in 0..p {
            if visited >= self.max_features {
                break;
            }
            let j = rng.random_range(k..p);
            features.swap(k, j);
            let f = features[k];
            let col = self.x.column(f);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &s in samples {
                lo = lo.min(col[s]);
                hi = hi.max(col[s]);
            }
            if lo >= hi {
                continue;
            }
            visited += 1;
            let cand = if self.random_thresholds {
                let threshold = rng.random_range(lo..hi);
                self.score_threshold(samples, col, threshold).map(|score| SplitChoice { feature: f, threshold, score })
            } else {
                self.scan_feature(samples, pos, col, buffer).map(|(threshold, score)| SplitChoice { feature: f, threshold, score })
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Gini proxy: sum over children of (sum_c count_c^2) / size. Larger is
    /// purer.
    #[inline]
    fn proxy(left_pos: f64, left_n: f64, right_pos: f64, right_n: f64) -> f64 {
        let l_neg = left_n - left_pos;
        let r_neg = right_n - right_pos;
        (left_pos * left_pos + l_neg * l_neg) / left_n + (right_pos * right_pos + r_neg * r_neg) / right_n
    }

    fn scan_feature(&self, samples: &[usize], pos: usize, col: &[f64], buffer: &mut Vec<(f64, u8)>) -> Option<(f64, f64)> {
        buffer.clear();
        buffer.extend(samples.iter().map(|&s| (col[s], self.y[s])));
        buffer.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = buffer.len();
        let min_leaf = self.min_samples_leaf;
        let total_pos = pos as f64;
        let mut left_pos = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            left_pos += f64::from(buffer[i].1);
            let left_n = i + 1;
            if buffer[i].0 == buffer[i + 1].0 || left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            let score = Self::proxy(left_pos, left_n as f64, total_pos - left_pos, (n - left_n) as f64);
            if best.is_none_or(|(_, b)| score > b) {
                let (a, b) = (buffer[i].0, buffer[i + 1].0);
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some((threshold, score));
            }
        }
        best
    }

    fn score_threshold(&self, samples: &[usize], col: &[f64], threshold: f64) -> Option<f64> {
        let (mut ln, mut lp, mut rn, mut rp) = (0usize, 0usize, 0usize, 0usize);
        for &s in samples {
            let yv = usize::from(self.y[s]);
            if col[s] <= threshold {
                ln += 1;
                lp += yv;
            } else {
                rn += 1;
                rp += yv;
            }
        }
        if ln < self.min_samples_leaf || rn < self.min_samples_leaf {
            return None;
        }
        Some(Self::proxy(lp as f64, ln as f64, rp as f64, rn as f64))
    }
}
