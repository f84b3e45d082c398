//! Binary P300 / non-P300 classifiers behind a common train/score contract.
//!
//! Three families are provided: Bayesian LDA with a shrunk pooled
//! covariance, a soft-margin linear SVM, and L1-penalized logistic
//! regression. Every trained model maps a feature vector to a real score,
//! positive meaning "P300"; a score of exactly zero counts as non-P300.

mod lasso;
mod lda;
mod svm;
mod tuning;

use std::fmt;
use std::str::FromStr;

pub use lasso::{
    binomial_deviance, deviance_gradient, lasso_lambda_max, lasso_objective, score_lasso_glm,
    train_lasso_glm, train_lasso_glm_from, LassoGlmModel, LassoOptions,
};
pub use lda::{score_bayes_lda, train_bayes_lda, BayesLdaModel, DEFAULT_SHRINKAGE};
pub use svm::{
    score_linear_svm, svm_objective, train_linear_svm, train_linear_svm_ipm, train_linear_svm_traced,
    train_linear_svm_with, LinearSvmModel, SMO_MAX_ROWS,
    SvmOptions, SvmTrace,
};
pub use tuning::{
    auc, lasso_lambda_path, select_lasso_lambda, select_svm_c, INNER_FOLDS, SVM_C_GRID,
};

use crate::dsp::FeatureVector;
use crate::error::{Error, Result};

/// Labelled training rows, borrowed from wherever the features live.
#[derive(Debug, Clone)]
pub struct TrainingSet<'a> {
    pub features: Vec<&'a [f64]>,
    pub labels: Vec<bool>,
    /// `(p(non-P300), p(P300))`; empirical frequencies when `None`.
    pub class_priors: Option<(f64, f64)>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(features: Vec<&'a [f64]>, labels: Vec<bool>) -> Result<Self> {
        let set = TrainingSet {
            features,
            labels,
            class_priors: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn from_feature_vectors(vectors: &'a [FeatureVector]) -> Result<Self> {
        Self::new(
            vectors.iter().map(|v| v.values.as_slice()).collect(),
            vectors.iter().map(|v| v.label).collect(),
        )
    }

    pub fn with_priors(mut self, p_non_target: f64, p_target: f64) -> Result<Self> {
        if !(p_non_target > 0.0 && p_target > 0.0 && (p_non_target + p_target - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidHyperparameter(format!(
                "class priors ({p_non_target}, {p_target}) must be positive and sum to 1"
            )));
        }
        self.class_priors = Some((p_non_target, p_target));
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidTrainingSet("no examples".into()));
        }
        if self.features.len() != self.labels.len() {
            return Err(Error::InvalidTrainingSet(format!(
                "{} examples but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let dim = self.features[0].len();
        if dim == 0 {
            return Err(Error::InvalidTrainingSet("zero-length features".into()));
        }
        if let Some(bad) = self.features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if self.features.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidTrainingSet("non-finite feature value".into()));
        }
        let n_pos = self.n_positive();
        if n_pos == 0 || n_pos == self.labels.len() {
            return Err(Error::InvalidTrainingSet("both labels must be present".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Rows selected by index, keeping the priors override.
    pub fn subset(&self, idx: &[usize]) -> TrainingSet<'a> {
        TrainingSet {
            features: idx.iter().map(|&i| self.features[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_priors: self.class_priors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierFamily {
    BayesLda,
    Svm,
    LassoGlm,
}

impl ClassifierFamily {
    pub const ALL: [ClassifierFamily; 3] = [
        ClassifierFamily::BayesLda,
        ClassifierFamily::Svm,
        ClassifierFamily::LassoGlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierFamily::BayesLda => "bayes_lda",
            ClassifierFamily::Svm => "svm",
            ClassifierFamily::LassoGlm => "lasso_glm",
        }
    }
}

impl fmt::Display for ClassifierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bayes_lda" | "lda" => Ok(ClassifierFamily::BayesLda),
            "svm" => Ok(ClassifierFamily::Svm),
            "lasso_glm" | "lasso" => Ok(ClassifierFamily::LassoGlm),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    BayesLda(BayesLdaModel),
    Svm(LinearSvmModel),
    LassoGlm(LassoGlmModel),
}

impl TrainedClassifier {
    pub fn family(&self) -> ClassifierFamily {
        match self {
            TrainedClassifier::BayesLda(_) => ClassifierFamily::BayesLda,
            TrainedClassifier::Svm(_) => ClassifierFamily::Svm,
            TrainedClassifier::LassoGlm(_) => ClassifierFamily::LassoGlm,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedClassifier::BayesLda(m) => m.dim(),
            TrainedClassifier::Svm(m) => m.w.len(),
            TrainedClassifier::LassoGlm(m) => m.beta.len(),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedClassifier::BayesLda(m) => score_bayes_lda(m, x),
            TrainedClassifier::Svm(m) => score_linear_svm(m, x),
            TrainedClassifier::LassoGlm(m) => score_lasso_glm(m, x),
        }
    }

    /// The family's hyperparameter (shrinkage, C or lambda).
    pub fn hyperparameter(&self) -> f64 {
        match self {
            TrainedClassifier::BayesLda(m) => m.shrinkage,
            TrainedClassifier::Svm(m) => m.c,
            TrainedClassifier::LassoGlm(m) => m.lambda,
        }
    }
}

/// Anything that assigns a P300 score to a feature vector.
pub trait Scorer {
    fn score(&self, x: &FeatureVector) -> Result<f64>;
}

impl Scorer for TrainedClassifier {
    fn score(&self, x: &FeatureVector) -> Result<f64> {
        TrainedClassifier::score(self, &x.values)
    }
}

impl<F> Scorer for F
where
    F: Fn(&FeatureVector) -> f64,
{
    fn score(&self, x: &FeatureVector) -> Result<f64> {
        Ok(self(x))
    }
}

/// Hard decision: strictly positive scores are P300.
pub fn is_p300(score: f64) -> bool {
    score > 0.0
}

/// Trains one family. `hyper` is the LDA shrinkage, SVM `C` or lasso
/// `lambda`; when `None`, shrinkage defaults to 0.1 and `C` / `lambda` are
/// picked by inner cross-validation.
pub fn train(
    family: ClassifierFamily,
    data: &TrainingSet<'_>,
    hyper: Option<f64>,
) -> Result<TrainedClassifier> {
    Ok(match family {
        ClassifierFamily::BayesLda => TrainedClassifier::BayesLda(train_bayes_lda(
            data,
            hyper.unwrap_or(DEFAULT_SHRINKAGE),
        )?),
        ClassifierFamily::Svm => {
            let c = match hyper {
                Some(c) => c,
                None => select_svm_c(data)?,
            };
            TrainedClassifier::Svm(train_linear_svm(data, c)?)
        }
        ClassifierFamily::LassoGlm => {
            let lambda = match hyper {
                Some(l) => l,
                None => select_lasso_lambda(data)?,
            };
            TrainedClassifier::LassoGlm(train_lasso_glm(data, lambda)?)
        }
    })
}

/// [`train`] with the family given by name.
pub fn train_by_name(
    family: &str,
    data: &TrainingSet<'_>,
    hyper: Option<f64>,
) -> Result<TrainedClassifier> {
    train(family.parse()?, data, hyper)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}
