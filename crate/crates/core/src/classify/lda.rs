use nalgebra::{DMatrix, DVector};

use super::{check_dim, dot, TrainingSet};
use crate::error::{Error, Result};

/// Default blend factor toward the scaled identity.
pub const DEFAULT_SHRINKAGE: f64 = 0.1;

/// Gaussian class-conditional model with a shared covariance.
///
/// The class discriminants are
/// `g_k(x) = x' S mu_k - mu_k' S mu_k / 2 + ln p_k` with `S` the inverse of
/// the shrunk pooled covariance; the score is `g_1(x) - g_0(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesLdaModel {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub sigma_inv: DMatrix<f64>,
    /// `(ln p(non-P300), ln p(P300))`.
    pub log_priors: (f64, f64),
    pub shrinkage: f64,
    weights: Vec<f64>,
    bias: f64,
}

impl BayesLdaModel {
    /// Assembles a model from its parameters, precomputing the linear form.
    pub fn from_parts(
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        sigma_inv: DMatrix<f64>,
        log_priors: (f64, f64),
        shrinkage: f64,
    ) -> Result<Self> {
        let d = mu0.len();
        if mu1.len() != d || sigma_inv.nrows() != d || sigma_inv.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mu1.len().max(sigma_inv.nrows()),
            });
        }
        let m0 = DVector::from_column_slice(&mu0);
        let m1 = DVector::from_column_slice(&mu1);
        let s_m0 = &sigma_inv * &m0;
        let s_m1 = &sigma_inv * &m1;
        let weights: Vec<f64> = (&s_m1 - &s_m0).iter().copied().collect();
        let bias = -0.5 * (m1.dot(&s_m1) - m0.dot(&s_m0)) + log_priors.1 - log_priors.0;
        Ok(BayesLdaModel {
            mu0,
            mu1,
            sigma_inv,
            log_priors,
            shrinkage,
            weights,
            bias,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    /// `Sigma^-1 (mu1 - mu0)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

/// Fits class means and a pooled covariance blended with
/// `(trace / d) * I` by the factor `shrinkage`.
pub fn train_bayes_lda(data: &TrainingSet<'_>, shrinkage: f64) -> Result<BayesLdaModel> {
    data.validate()?;
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidHyperparameter(format!(
            "shrinkage {shrinkage} outside [0, 1]"
        )));
    }
    let d = data.dim();
    let n = data.len();
    let n1 = data.n_positive();
    let n0 = n - n1;
    for (label, count) in [(false, n0), (true, n1)] {
        if count < 2 {
            return Err(Error::DegenerateClass { label, count });
        }
    }

    let mut mu0 = vec![0.0; d];
    let mut mu1 = vec![0.0; d];
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let mu = if y { &mut mu1 } else { &mut mu0 };
        for (m, v) in mu.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    mu0.iter_mut().for_each(|m| *m /= n0 as f64);
    mu1.iter_mut().for_each(|m| *m /= n1 as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| {
        let mu = if data.labels[i] { &mu1 } else { &mu0 };
        data.features[i][j] - mu[j]
    });
    let mut sigma = centered.tr_mul(&centered) / (n - 2) as f64;
    let nu = sigma.trace() / d as f64;
    if !(nu > 0.0) {
        return Err(Error::SingularCovariance);
    }
    sigma *= 1.0 - shrinkage;
    for i in 0..d {
        sigma[(i, i)] += shrinkage * nu;
    }
    let chol = sigma.cholesky().ok_or(Error::SingularCovariance)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > hi * 1e-7) {
        return Err(Error::SingularCovariance);
    }
    let sigma_inv = chol.inverse();
    if sigma_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }

    let (p0, p1) = data
        .class_priors
        .unwrap_or((n0 as f64 / n as f64, n1 as f64 / n as f64));
    BayesLdaModel::from_parts(mu0, mu1, sigma_inv, (p0.ln(), p1.ln()), shrinkage)
}

/// `g_1(x) - g_0(x)`; positive favours P300.
pub fn score_bayes_lda(model: &BayesLdaModel, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x)?;
    Ok(dot(&model.weights, x) + model.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set<'a>(rows: &'a [Vec<f64>], labels: &[bool]) -> TrainingSet<'a> {
        TrainingSet::new(rows.iter().map(Vec::as_slice).collect(), labels.to_vec()).unwrap()
    }

    /// 1-D classes with sample means exactly -1 and +1.
    fn one_d(n_per_class: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let offsets = [-0.9, -0.3, 0.3, 0.9, -1.2, 1.2];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..n_per_class {
            let o = offsets[k % offsets.len()];
            rows.push(vec![-1.0 + o]);
            labels.push(false);
            rows.push(vec![1.0 + o]);
            labels.push(true);
        }
        (rows, labels)
    }

    #[test]
    fn symmetric_classes_split_at_zero() {
        let (rows, labels) = one_d(6);
        let m = train_bayes_lda(&set(&rows, &labels), 0.0).unwrap();
        assert!(score_bayes_lda(&m, &[0.0]).unwrap().abs() < 1e-12);
        assert!(score_bayes_lda(&m, &[0.1]).unwrap() > 0.0);
        assert!(score_bayes_lda(&m, &[1.0]).unwrap() > 0.0);
        assert!(score_bayes_lda(&m, &[-1.0]).unwrap() < 0.0);
    }

    #[test]
    fn prior_shifts_boundary_toward_class_zero() {
        let (rows, labels) = one_d(6);
        let data = set(&rows, &labels).with_priors(0.1, 0.9).unwrap();
        let m = train_bayes_lda(&data, 0.0).unwrap();
        // Closed form: x* = ln(p0/p1) * var / (mu1 - mu0) + (mu0 + mu1) / 2.
        let var = rows
            .iter()
            .zip(&labels)
            .map(|(x, &y)| (x[0] - if y { 1.0 } else { -1.0 }).powi(2))
            .sum::<f64>()
            / (rows.len() - 2) as f64;
        let expected = (0.1f64 / 0.9).ln() * var / 2.0;
        let boundary = -m.bias() / m.weights()[0];
        assert!(expected < 0.0);
        assert!((boundary - expected).abs() < 1e-9, "{boundary} vs {expected}");
    }

    #[test]
    fn equal_means_leave_prior_ratio() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![2.0, 3.0], vec![-2.0, -1.0], vec![0.0, 1.0]];
        let labels = [false, false, false, true, true, true];
        let data = set(&rows, &labels).with_priors(0.25, 0.75).unwrap();
        let m = train_bayes_lda(&data, 0.1).unwrap();
        let ratio = (0.75f64 / 0.25).ln();
        for x in [[0.0, 0.0], [5.0, -3.0], [-7.0, 11.0]] {
            assert!((score_bayes_lda(&m, &x).unwrap() - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn midpoint_scores_zero_and_fields_reproduce_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let shift = if i % 2 == 0 { 1.5 } else { -1.5 };
                (0..d).map(|_| rng.random::<f64>() + shift).collect()
            })
            .collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let m = train_bayes_lda(&set(&rows, &labels), DEFAULT_SHRINKAGE).unwrap();
        let mid: Vec<f64> = m.mu0.iter().zip(&m.mu1).map(|(a, b)| (a + b) / 2.0).collect();
        assert!(score_bayes_lda(&m, &mid).unwrap().abs() < 1e-9);
        assert!(score_bayes_lda(&m, &m.mu1).unwrap() > 0.0);

        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = |mu: &[f64], lp: f64| {
                let mut quad_x = 0.0;
                let mut quad_mu = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        quad_x += x[i] * m.sigma_inv[(i, j)] * mu[j];
                        quad_mu += mu[i] * m.sigma_inv[(i, j)] * mu[j];
                    }
                }
                quad_x - 0.5 * quad_mu + lp
            };
            let oracle = g(&m.mu1, m.log_priors.1) - g(&m.mu0, m.log_priors.0);
            assert!((score_bayes_lda(&m, &x).unwrap() - oracle).abs() < 1e-9);
        }
        assert!(matches!(
            score_bayes_lda(&m, &[0.0; 3]),
            Err(Error::DimensionMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn degenerate_inputs() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(matches!(
            train_bayes_lda(&set(&rows, &[true, false, false]), 0.1),
            Err(Error::DegenerateClass { label: true, count: 1 })
        ));
        let flat = vec![vec![1.0, 1.0]; 4];
        assert!(matches!(
            train_bayes_lda(&set(&flat, &[true, true, false, false]), 0.1),
            Err(Error::SingularCovariance)
        ));
        // Rank-deficient covariance is rescued by shrinkage.
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0], vec![-3.0, -3.0]];
        let labels = [true, true, false, false];
        assert!(matches!(
            train_bayes_lda(&set(&rows, &labels), 0.0),
            Err(Error::SingularCovariance)
        ));
        assert!(train_bayes_lda(&set(&rows, &labels), 0.1).is_ok());
        assert!(train_bayes_lda(&set(&rows, &labels), 1.5).is_err());
    }
}
