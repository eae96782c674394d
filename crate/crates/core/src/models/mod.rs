//! Classifier abstraction, the built-in classifiers, ROC-AUC and grouped
//! k-fold splitting.

mod boosting;
mod cv;
mod forest;
mod logistic;
mod metrics;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use boosting::BoostingParams;
pub use cv::{grouped_kfold, FoldPlan};
pub use forest::ForestParams;
pub use logistic::LogisticParams;
pub use metrics::roc_auc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("too few groups: {groups} distinct groups for {k} folds")]
    TooFewGroups { groups: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("non-finite input value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    RandomForest,
    ExtraTrees,
    GradientBoostedTrees,
    LogisticRegression,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::RandomForest,
        ClassifierKind::ExtraTrees,
        ClassifierKind::GradientBoostedTrees,
        ClassifierKind::LogisticRegression,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::ExtraTrees => "et",
            ClassifierKind::GradientBoostedTrees => "gbt",
            ClassifierKind::LogisticRegression => "logreg",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rf" | "random_forest" => Ok(ClassifierKind::RandomForest),
            "et" | "extra_trees" => Ok(ClassifierKind::ExtraTrees),
            "gbt" | "gradient_boosted_trees" => Ok(ClassifierKind::GradientBoostedTrees),
            "logreg" | "logistic_regression" => Ok(ClassifierKind::LogisticRegression),
            other => Err(format!("unknown classifier `{other}` (expected rf, et, gbt or logreg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparameters {
    Forest(ForestParams),
    Boosting(BoostingParams),
    Logistic(LogisticParams),
}

/// A built-in model kind, its hyperparameters and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub params: Hyperparameters,
    pub seed: u64,
}

impl ClassifierSpec {
    /// Default hyperparameters for `kind`.
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        let params = match kind {
            ClassifierKind::RandomForest | ClassifierKind::ExtraTrees => Hyperparameters::Forest(ForestParams::default()),
            ClassifierKind::GradientBoostedTrees => Hyperparameters::Boosting(BoostingParams::default()),
            ClassifierKind::LogisticRegression => Hyperparameters::Logistic(LogisticParams::default()),
        };
        ClassifierSpec { kind, params, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ClassifierSpec { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.to_string()));
        match (&self.kind, &self.params) {
            (ClassifierKind::RandomForest | ClassifierKind::ExtraTrees, Hyperparameters::Forest(p)) => {
                if p.n_trees == 0 {
                    return bad("forest needs at least one tree");
                }
                if p.min_samples_leaf == 0 {
                    return bad("min_samples_leaf must be positive");
                }
            }
            (ClassifierKind::GradientBoostedTrees, Hyperparameters::Boosting(p)) => {
                if p.learning_rate.is_nan() || p.learning_rate <= 0.0 {
                    return bad("learning rate must be positive");
                }
                if !(p.subsample > 0.0 && p.subsample <= 1.0) || !(p.colsample > 0.0 && p.colsample <= 1.0) {
                    return bad("subsample fractions must lie in (0, 1]");
                }
                if p.min_samples_leaf == 0 || p.lambda < 0.0 {
                    return bad("min_samples_leaf must be positive and lambda non-negative");
                }
            }
            (ClassifierKind::LogisticRegression, Hyperparameters::Logistic(p)) => {
                if p.c.is_nan() || p.c <= 0.0 {
                    return bad("C must be positive");
                }
            }
            _ => return bad("hyperparameters do not match the classifier kind"),
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum ModelState {
    Forest(forest::Forest),
    Boosted(boosting::BoostedTrees),
    Logistic(logistic::LogisticModel),
}

/// Trained model. Immutable; safe to share across threads for scoring.
#[derive(Debug, Clone)]
pub struct FittedModel {
    feature_names: Vec<String>,
    state: ModelState,
}

impl FittedModel {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Weights and bias on the original feature scale, for logistic models.
    pub fn linear_coefficients(&self) -> Option<(&[f64], f64)> {
        match &self.state {
            ModelState::Logistic(m) => Some((&m.weights, m.bias)),
            _ => None,
        }
    }
}

pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[u8]) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    if x.n_rows() != y.len() {
        return Err(ModelError::DimensionMismatch(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if x.n_cols() == 0 {
        return Err(ModelError::DimensionMismatch("no feature columns".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ModelError::SingleClass);
    }
    if (0..x.n_cols()).any(|c| x.column(c).iter().any(|v| !v.is_finite())) {
        return Err(ModelError::NonFinite);
    }
    let state = match &spec.params {
        Hyperparameters::Forest(p) => {
            let randomized = spec.kind == ClassifierKind::ExtraTrees;
            ModelState::Forest(forest::Forest::fit(p, randomized, x, y, spec.seed))
        }
        Hyperparameters::Boosting(p) => ModelState::Boosted(boosting::BoostedTrees::fit(p, x, y, spec.seed)),
        Hyperparameters::Logistic(p) => ModelState::Logistic(logistic::LogisticModel::fit(p, x, y)),
    };
    Ok(FittedModel { feature_names: x.names().to_vec(), state })
}

/// Larger scores mean class 1 is more likely: forest vote fraction, boosted
/// log-odds, or the logistic linear score.
pub fn predict_scores(model: &FittedModel, x: &Matrix) -> Result<Vec<f64>, ModelError> {
    if x.names() != model.feature_names.as_slice() {
        return Err(ModelError::DimensionMismatch(format!(
            "model trained on {} features {:?}, got {} features",
            model.feature_names.len(),
            model.feature_names.iter().take(4).collect::<Vec<_>>(),
            x.n_cols()
        )));
    }
    Ok(match &model.state {
        ModelState::Forest(f) => f.predict(x),
        ModelState::Boosted(b) => b.predict(x),
        ModelState::Logistic(l) => l.predict(x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise_matrix(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = seed::rng(seed, &[]);
        let cols = (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        Matrix::from_columns((0..p).map(|j| format!("x{j}")).collect(), cols)
    }

    fn split(x: &Matrix, y: &[u8], n_train: usize) -> (Matrix, Vec<u8>, Matrix, Vec<u8>) {
        let tr: Vec<usize> = (0..n_train).collect();
        let te: Vec<usize> = (n_train..x.n_rows()).collect();
        (x.select_rows(&tr), y[..n_train].to_vec(), x.select_rows(&te), y[n_train..].to_vec())
    }

    fn small(kind: ClassifierKind) -> ClassifierSpec {
        let mut spec = ClassifierSpec::new(kind, 3);
        match &mut spec.params {
            Hyperparameters::Forest(p) => p.n_trees = 60,
            Hyperparameters::Boosting(p) => p.n_rounds = 60,
            Hyperparameters::Logistic(_) => {}
        }
        spec
    }

    #[test]
    fn defaults_follow_configuration() {
        let rf = ClassifierSpec::new(ClassifierKind::RandomForest, 0);
        let Hyperparameters::Forest(p) = rf.params else { panic!() };
        assert_eq!((p.n_trees, p.max_depth, p.min_samples_leaf), (500, None, 1));
        let gbt = ClassifierSpec::new(ClassifierKind::GradientBoostedTrees, 0);
        let Hyperparameters::Boosting(p) = gbt.params else { panic!() };
        assert_eq!((p.n_rounds, p.learning_rate, p.subsample, p.colsample, p.max_depth), (300, 0.05, 0.8, 0.8, 6));
        let lr = ClassifierSpec::new(ClassifierKind::LogisticRegression, 0);
        let Hyperparameters::Logistic(p) = lr.params else { panic!() };
        assert_eq!(p.c, 1.0);
    }

    #[test]
    fn logistic_learns_threshold_rule() {
        let x = noise_matrix(500, 1, 1);
        let y: Vec<u8> = x.column(0).iter().map(|&v| u8::from(v > 0.0)).collect();
        let (xtr, ytr, xte, yte) = split(&x, &y, 350);
        let m = fit(&ClassifierSpec::new(ClassifierKind::LogisticRegression, 0), &xtr, &ytr).unwrap();
        let auc = roc_auc(&predict_scores(&m, &xte).unwrap(), &yte).unwrap();
        assert!(auc >= 0.99, "auc {auc}");
    }

    #[test]
    fn forest_on_noise_is_near_chance() {
        let x = noise_matrix(500, 5, 2);
        let mut rng = seed::rng(77, &[]);
        let y: Vec<u8> = (0..500).map(|_| rng.random_range(0..2)).collect();
        let (xtr, ytr, xte, yte) = split(&x, &y, 350);
        let m = fit(&ClassifierSpec::new(ClassifierKind::RandomForest, 5), &xtr, &ytr).unwrap();
        let auc = roc_auc(&predict_scores(&m, &xte).unwrap(), &yte).unwrap();
        assert!((0.4..=0.6).contains(&auc), "auc {auc}");
    }

    #[test]
    fn every_kind_learns_signal() {
        let x = noise_matrix(400, 4, 9);
        let y: Vec<u8> = (0..400).map(|r| u8::from(x.get(r, 0) + 0.5 * x.get(r, 1) > 0.0)).collect();
        let (xtr, ytr, xte, yte) = split(&x, &y, 300);
        for kind in ClassifierKind::ALL {
            let m = fit(&small(kind), &xtr, &ytr).unwrap();
            let auc = roc_auc(&predict_scores(&m, &xte).unwrap(), &yte).unwrap();
            assert!(auc > 0.85, "{kind}: auc {auc}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = noise_matrix(10, 2, 1);
        for kind in ClassifierKind::ALL {
            assert_eq!(fit(&small(kind), &x, &[0; 10]).unwrap_err(), ModelError::SingleClass);
        }
        assert!(matches!(fit(&small(ClassifierKind::RandomForest), &x, &[0, 1]), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn scores_shape_and_layout_check() {
        let x = noise_matrix(50, 3, 4);
        let y: Vec<u8> = (0..50).map(|r| u8::from(x.get(r, 2) > 0.0)).collect();
        for kind in ClassifierKind::ALL {
            let m = fit(&small(kind), &x, &y).unwrap();
            assert_eq!(predict_scores(&m, &x).unwrap().len(), 50);
            let reordered = x.select_columns(&[1, 0, 2]);
            assert!(matches!(predict_scores(&m, &reordered), Err(ModelError::DimensionMismatch(_))));
        }
    }

    #[test]
    fn constant_features_give_constant_scores() {
        let x = Matrix::from_columns(vec!["a".into(), "b".into()], vec![vec![3.0; 40], vec![-1.0; 40]]);
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        for kind in ClassifierKind::ALL {
            let m = fit(&small(kind), &x, &y).unwrap();
            let s = predict_scores(&m, &x).unwrap();
            assert!(s.iter().all(|&v| v == s[0]), "{kind}");
        }
    }

    #[test]
    fn logistic_score_is_linear() {
        let x = noise_matrix(200, 3, 6);
        let y: Vec<u8> = (0..200).map(|r| u8::from(x.get(r, 0) - x.get(r, 2) > 0.3)).collect();
        let m = fit(&small(ClassifierKind::LogisticRegression), &x, &y).unwrap();
        let (w, b) = m.linear_coefficients().unwrap();
        let s = predict_scores(&m, &x).unwrap();
        for r in 0..200 {
            let manual: f64 = (0..3).map(|c| x.get(r, c) * w[c]).sum::<f64>() + b;
            assert!((manual - s[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn fits_are_reproducible_for_fixed_seed() {
        let x = noise_matrix(120, 4, 8);
        let y: Vec<u8> = (0..120).map(|r| u8::from(x.get(r, 1) > 0.1)).collect();
        for kind in ClassifierKind::ALL {
            let a = predict_scores(&fit(&small(kind), &x, &y).unwrap(), &x).unwrap();
            let b = predict_scores(&fit(&small(kind), &x, &y).unwrap(), &x).unwrap();
            assert_eq!(a, b);
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let spec = small(ClassifierKind::RandomForest);
        let serial = predict_scores(&fit(&spec, &x, &y).unwrap(), &x).unwrap();
        let parallel = pool.install(|| predict_scores(&fit(&spec, &x, &y).unwrap(), &x).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ClassifierKind::ALL {
            assert_eq!(kind.short_name().parse::<ClassifierKind>().unwrap(), kind);
        }
        assert!("svm".parse::<ClassifierKind>().is_err());
    }
}
