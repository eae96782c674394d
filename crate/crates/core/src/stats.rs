//! Exact binomial test, Benjamini-Hochberg adjustment and the paired t-test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid counts: {hits} hits out of {trials} trials")]
    InvalidCounts { hits: u64, trials: u64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: Option<f64>,
    /// Set when the statistic is undefined (zero variance) and the p-value
    /// was assigned by convention.
    #[serde(default)]
    pub degenerate: bool,
}

/// Lower and upper tails `(P(X <= k), P(X >= k))` of Binomial(n, p).
///
/// Probabilities are accumulated relative to the mode and normalized by their
/// total, which keeps every term representable for large `n`.
pub fn binom_tails(k: u64, n: u64, p: f64) -> (f64, f64) {
    if p == 0.0 {
        return (1.0, if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return (if k == n { 1.0 } else { 0.0 }, 1.0);
    }
    let n_us = n as usize;
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
    let odds = p / (1.0 - p);
    let mut w = vec![0.0; n_us + 1];
    w[mode] = 1.0;
    for j in mode..n_us {
        // w(j+1) / w(j) = (n - j) / (j + 1) * p / (1 - p)
        w[j + 1] = w[j] * ((n_us - j) as f64 / (j + 1) as f64) * odds;
    }
    for j in (0..mode).rev() {
        w[j] = w[j + 1] * ((j + 1) as f64 / (n_us - j) as f64) / odds;
    }
    let k = k as usize;
    let total: f64 = w.iter().sum();
    let lower: f64 = w[..=k].iter().sum::<f64>() / total;
    let upper: f64 = w[k..].iter().sum::<f64>() / total;
    (lower.min(1.0), upper.min(1.0))
}

/// Two-sided exact binomial test by doubling the smaller tail.
pub fn binom_two_tailed(hits: u64, trials: u64, p0: f64) -> Result<TestResult, StatsError> {
    if trials == 0 || hits > trials {
        return Err(StatsError::InvalidCounts { hits, trials });
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(StatsError::InvalidProbability(p0));
    }
    // at p0 = 1/2 the distribution is symmetric; evaluate the same tail for k and n - k
    let (lower, upper) = if p0 == 0.5 {
        let (lo, _) = binom_tails(hits.min(trials - hits), trials, p0);
        (lo, lo)
    } else {
        binom_tails(hits, trials, p0)
    };
    Ok(TestResult {
        statistic: hits as f64,
        p_value: (2.0 * lower.min(upper)).min(1.0),
        degrees_of_freedom: None,
        degenerate: false,
    })
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let p = p_values[i];
        let q = if rank + 1 == m { p } else { (p * m as f64 / (rank + 1) as f64).max(p) };
        running = running.min(q);
        adjusted[i] = running.min(1.0);
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Alternative: mean(a - b) > 0.
    Greater,
    /// Alternative: mean(a - b) < 0.
    Less,
}

pub fn paired_t_one_tailed(a: &[f64], b: &[f64], direction: Direction) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooShort(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = (n - 1) as f64;
    let favored = match direction {
        Direction::Greater => mean > 0.0,
        Direction::Less => mean < 0.0,
    };
    let all_same = d.iter().all(|&x| x == d[0]);
    if all_same || var == 0.0 {
        let (statistic, p_value) = if d[0] == 0.0 && all_same {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, if favored { 0.0 } else { 1.0 })
        };
        return Ok(TestResult { statistic, p_value, degrees_of_freedom: Some(df), degenerate: true });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let p_value = match direction {
        Direction::Greater => student_t_sf(t, df),
        Direction::Less => student_t_cdf(t, df),
    };
    Ok(TestResult { statistic: t, p_value, degrees_of_freedom: Some(df), degenerate: false })
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(x, df / 2.0, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Survival function `P(T > t)`, computed without cancellation for large `t`.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    student_t_cdf(-t, df)
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)` via Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;

    /// Exact P(X <= k) for Binomial(n, 1/2) from integer binomial coefficients.
    fn exact_half_lower(k: u64, n: u64) -> f64 {
        let mut c = BigUint::one();
        let mut sum = BigUint::zero();
        for j in 0..=k {
            sum += &c;
            c = c * BigUint::from(n - j) / BigUint::from(j + 1);
        }
        // sum / 2^n; sum < 2^1024 for n <= 1000
        let f = sum.to_f64().unwrap();
        f * 2f64.powi(-(n as i32))
    }

    #[test]
    fn binomial_worked_examples() {
        let r = binom_two_tailed(20, 20, 0.5).unwrap();
        assert!((r.p_value - 2.0 * 0.5f64.powi(20)).abs() < 1e-15);
        assert!((r.p_value - 1.9073e-6).abs() < 1e-10);
        assert_eq!(binom_two_tailed(10, 20, 0.5).unwrap().p_value, 1.0);
        assert_eq!(binom_two_tailed(0, 1, 0.5).unwrap().p_value, 1.0);
        assert!(matches!(binom_two_tailed(3, 2, 0.5), Err(StatsError::InvalidCounts { .. })));
        assert!(matches!(binom_two_tailed(0, 0, 0.5), Err(StatsError::InvalidCounts { .. })));
    }

    #[test]
    fn binomial_tails_match_exact_summation() {
        for n in [1u64, 2, 5, 17, 50, 99, 250, 500, 777, 1000] {
            for k in (0..=n).step_by(((n / 25).max(1)) as usize) {
                let (lower, upper) = binom_tails(k, n, 0.5);
                assert!((lower - exact_half_lower(k, n)).abs() < 1e-12, "n={n} k={k}");
                let exact_upper = if k == 0 { 1.0 } else { 1.0 - exact_half_lower(k - 1, n) };
                assert!((upper - exact_upper).abs() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn binomial_non_half_p0() {
        // Binomial(3, 0.2): P(X <= 0) = 0.512, P(X >= 3) = 0.008
        let (lo, _) = binom_tails(0, 3, 0.2);
        assert!((lo - 0.512).abs() < 1e-15);
        let (_, up) = binom_tails(3, 3, 0.2);
        assert!((up - 0.008).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn binomial_symmetric_at_half(n in 1u64..400, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let a = binom_two_tailed(k, n, 0.5).unwrap().p_value;
            let b = binom_two_tailed(n - k, n, 0.5).unwrap().p_value;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn bh_dominates_input_and_is_monotone(ps in prop::collection::vec(0.0f64..=1.0, 1..30)) {
            let q = bh_adjust(&ps).unwrap();
            for (p, a) in ps.iter().zip(&q) {
                prop_assert!(a >= p && *a <= 1.0);
            }
            let mut idx: Vec<usize> = (0..ps.len()).collect();
            idx.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            for w in idx.windows(2) {
                prop_assert!(q[w[0]] <= q[w[1]]);
            }
        }
    }

    #[test]
    fn bh_worked_examples() {
        assert_eq!(bh_adjust(&[0.01, 0.04, 0.03, 0.005]).unwrap(), vec![0.02, 0.04, 0.04, 0.02]);
        assert_eq!(bh_adjust(&[0.5]).unwrap(), vec![0.5]);
        assert_eq!(bh_adjust(&[0.2, 0.2, 0.2]).unwrap(), vec![0.2, 0.2, 0.2]);
        assert_eq!(bh_adjust(&[]).unwrap(), Vec::<f64>::new());
        assert!(matches!(bh_adjust(&[0.1, 1.2]), Err(StatsError::OutOfRange(_))));
    }

    #[test]
    fn bh_fixed_points() {
        for v in [vec![0.3; 5], vec![0.0, 0.0, 0.7], vec![0.04, 0.04]] {
            let q = bh_adjust(&v).unwrap();
            assert_eq!(q, v);
            assert_eq!(bh_adjust(&q).unwrap(), q);
        }
        // adjusting twice can move values further when they are not tied
        let q = bh_adjust(&[0.01, 0.5]).unwrap();
        assert_eq!(q, vec![0.02, 0.5]);
        assert_eq!(bh_adjust(&q).unwrap(), vec![0.04, 0.5]);
    }

    #[test]
    fn paired_t_worked_examples() {
        let a = [0.80, 0.82, 0.78, 0.81, 0.79];
        let b = [0.75, 0.77, 0.74, 0.76, 0.73];
        let g = paired_t_one_tailed(&a, &b, Direction::Greater).unwrap();
        assert!((g.statistic - 15.811).abs() < 1e-2);
        assert_eq!(g.degrees_of_freedom, Some(4.0));
        assert!(g.p_value < 1e-4);
        let l = paired_t_one_tailed(&a, &b, Direction::Less).unwrap();
        assert!(l.p_value > 0.9999);
        assert!((g.p_value + l.p_value - 1.0).abs() < 1e-12);

        let same = paired_t_one_tailed(&a, &a, Direction::Greater).unwrap();
        assert_eq!(same.p_value, 1.0);
        assert!(same.degenerate);

        let up = paired_t_one_tailed(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], Direction::Greater).unwrap();
        assert!(up.degenerate && up.p_value == 0.0);
        let down = paired_t_one_tailed(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], Direction::Less).unwrap();
        assert!(down.degenerate && down.p_value == 1.0);
        assert!(matches!(paired_t_one_tailed(&[1.0], &[1.0], Direction::Less), Err(StatsError::TooShort(1))));
    }

    // Oracle: integrate the unnormalized density under t = tan(theta), which
    // maps the real line to (-pi/2, pi/2), and normalize by the full integral.
    fn integrand(theta: f64, df: f64) -> f64 {
        let t = theta.tan();
        let sec2 = 1.0 + t * t;
        (1.0 + t * t / df).powf(-(df + 1.0) / 2.0) * sec2
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, eps, depth)
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        for df in 1..=50 {
            let df = df as f64;
            let f = |th: f64| integrand(th, df);
            let total = adaptive_simpson(&f, -half_pi, half_pi, 1e-13, 50);
            for &t in &[-6.0f64, -2.5, -1.0, -0.3, 0.0, 0.4, 1.7, 3.0, 8.0] {
                let part = adaptive_simpson(&f, -half_pi, t.atan(), 1e-13, 50);
                let oracle = part / total;
                assert!((student_t_cdf(t, df) - oracle).abs() < 1e-8, "df={df} t={t}");
            }
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }
}
