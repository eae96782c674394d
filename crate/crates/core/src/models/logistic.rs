use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse L2 strength: the objective is `sum(log-loss) + ||w||^2 / (2C)`.
    pub c: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { c: 1.0, max_iter: 1000, tol: 1e-8 }
    }
}

/// Weights are stored on the original feature scale; standardization is
/// folded into them after training.
#[derive(Debug, Clone)]
pub(crate) struct LogisticModel {
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub(crate) fn fit(params: &LogisticParams, x: &Matrix, y: &[u8]) -> LogisticModel {
        let n = x.n_rows();
        let p = x.n_cols();
        let nf = n as f64;
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / nf;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
            let sd = var.sqrt();
            means[j] = mean;
            scales[j] = if sd > 0.0 { sd } else { 1.0 };
            z.push(col.iter().map(|v| (v - mean) / scales[j]).collect());
        }
        let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

        // Work with the objective divided by n: mean log-loss + ||w||^2 / (2Cn).
        let reg = 1.0 / (params.c * nf);
        let lipschitz = 0.25 * largest_gram_eigenvalue(&z, n) + reg;
        let step = 1.0 / lipschitz;

        let mut w = vec![0.0; p];
        let mean_y = targets.iter().sum::<f64>() / nf;
        let mut b = (mean_y / (1.0 - mean_y)).ln();
        let mut margin = vec![b; n];
        let mut resid = vec![0.0; n];
        for _ in 0..params.max_iter {
            for i in 0..n {
                resid[i] = sigmoid(margin[i]) - targets[i];
            }
            let gb = resid.iter().sum::<f64>() / nf;
            let gw: Vec<f64> = (0..p)
                .map(|j| z[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + reg * w[j])
                .collect();
            let norm = (gb * gb + gw.iter().map(|g| g * g).sum::<f64>()).sqrt();
            if norm < params.tol {
                break;
            }
            b -= step * gb;
            for j in 0..p {
                w[j] -= step * gw[j];
            }
            margin.iter_mut().for_each(|m| *m = b);
            for j in 0..p {
                if w[j] != 0.0 {
                    for (m, a) in margin.iter_mut().zip(&z[j]) {
                        *m += w[j] * a;
                    }
                }
            }
        }

        let weights: Vec<f64> = (0..p).map(|j| w[j] / scales[j]).collect();
        let bias = b - (0..p).map(|j| weights[j] * means[j]).sum::<f64>();
        LogisticModel { weights, bias }
    }

    pub(crate) fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut out = vec![self.bias; x.n_rows()];
        for (j, &w) in self.weights.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(x.column(j)) {
                *o += w * v;
            }
        }
        out
    }
}

/// Power iteration on `[1 | Z]^T [1 | Z] / n`, padded slightly upward.
fn largest_gram_eigenvalue(z: &[Vec<f64>], n: usize) -> f64 {
    let p = z.len() + 1;
    let nf = n as f64;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 1.0;
    let mut u = vec![0.0; n];
    for _ in 0..100 {
        // u = A v
        u.iter_mut().for_each(|x| *x = v[0]);
        for (j, col) in z.iter().enumerate() {
            for (ui, a) in u.iter_mut().zip(col) {
                *ui += v[j + 1] * a;
            }
        }
        // v' = A^T u / n
        let mut next = vec![0.0; p];
        next[0] = u.iter().sum::<f64>() / nf;
        for (j, col) in z.iter().enumerate() {
            next[j + 1] = col.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / nf;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        v = next.into_iter().map(|x| x / norm).collect();
        if converged {
            break;
        }
    }
    lambda * 1.05
}
