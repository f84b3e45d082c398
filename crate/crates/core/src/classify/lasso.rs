//! L1-penalized logistic regression.
//!
//! Minimizes `Deviance(b0, beta) / N + lambda * ||beta||_1` where the
//! deviance is `-2` times the binomial log-likelihood and the intercept is
//! not penalized. Each outer step builds the quadratic (IRLS) model of the
//! deviance, minimizes model + penalty by cyclic coordinate descent with
//! soft-thresholding, then backtracks along the step until the true
//! objective decreases.

use super::{check_dim, dot, TrainingSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoGlmModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Converged when no coefficient moves more than this in an outer step.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-6,
            max_outer: 200,
            max_inner: 1000,
        }
    }
}

fn response(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
}

/// `log(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Binomial deviance `-2 * sum(y eta - log(1 + e^eta))`.
pub fn binomial_deviance(data: &TrainingSet<'_>, beta0: f64, beta: &[f64]) -> f64 {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, &l)| {
            let eta = beta0 + dot(beta, x);
            let y = if l { 1.0 } else { 0.0 };
            -2.0 * (y * eta - softplus(eta))
        })
        .sum()
}

/// Gradient of `Deviance / N`: `(d/d beta0, d/d beta)`.
pub fn deviance_gradient(data: &TrainingSet<'_>, beta0: f64, beta: &[f64]) -> (f64, Vec<f64>) {
    let n = data.len() as f64;
    let mut g0 = 0.0;
    let mut g = vec![0.0; beta.len()];
    for (x, &l) in data.features.iter().zip(&data.labels) {
        let y = if l { 1.0 } else { 0.0 };
        let r = sigmoid(beta0 + dot(beta, x)) - y;
        g0 += r;
        for (gj, xj) in g.iter_mut().zip(x.iter()) {
            *gj += r * xj;
        }
    }
    let scale = 2.0 / n;
    (g0 * scale, g.into_iter().map(|v| v * scale).collect())
}

/// `Deviance / N + lambda * ||beta||_1`.
pub fn lasso_objective(data: &TrainingSet<'_>, lambda: f64, beta0: f64, beta: &[f64]) -> f64 {
    binomial_deviance(data, beta0, beta) / data.len() as f64
        + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest lambda for which the all-zero coefficient vector is optimal:
/// the largest gradient coordinate at the intercept-only fit.
pub fn lasso_lambda_max(data: &TrainingSet<'_>) -> f64 {
    let p = data.n_positive() as f64 / data.len() as f64;
    let beta0 = (p / (1.0 - p)).ln();
    let (_, g) = deviance_gradient(data, beta0, &vec![0.0; data.dim()]);
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn train_lasso_glm(data: &TrainingSet<'_>, lambda: f64) -> Result<LassoGlmModel> {
    train_lasso_glm_from(data, lambda, None, LassoOptions::default())
}

/// Trains from an optional warm start (used along regularization paths).
pub fn train_lasso_glm_from(
    data: &TrainingSet<'_>,
    lambda: f64,
    warm: Option<&LassoGlmModel>,
    opts: LassoOptions,
) -> Result<LassoGlmModel> {
    data.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let n = data.len();
    let d = data.dim();
    let y = response(&data.labels);
    let (mut beta0, mut beta) = match warm {
        Some(m) if m.beta.len() == d => (m.beta0, m.beta.clone()),
        _ => {
            let p = data.n_positive() as f64 / n as f64;
            ((p / (1.0 - p)).ln(), vec![0.0; d])
        }
    };
    let scale = 2.0 / n as f64;
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| data.features.iter().map(|x| x[j]).collect())
        .collect();
    let mut eta: Vec<f64> = data.features.iter().map(|x| beta0 + dot(&beta, x)).collect();
    let mut objective = lasso_objective(data, lambda, beta0, &beta);
    let mut stalled = false;

    for _ in 0..opts.max_outer {
        // Quadratic model: weights w_i = p(1-p), residual r_i = y - p - w * d_eta.
        let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = p.iter().map(|&pi| (pi * (1.0 - pi)).max(1e-10)).collect();
        let mut r: Vec<f64> = y.iter().zip(&p).map(|(yi, pi)| yi - pi).collect();
        let h0 = scale * w.iter().sum::<f64>();
        let hjj: Vec<f64> = cols
            .iter()
            .map(|col| scale * col.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>())
            .collect();

        let mut new0 = beta0;
        let mut new = beta.clone();
        let mut active: Vec<bool> = new.iter().map(|&b| b != 0.0).collect();
        let mut full_sweep = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let mut max_change = 0.0f64;

            let g0 = -scale * r.iter().sum::<f64>();
            let step0 = -g0 / h0;
            if step0 != 0.0 {
                new0 += step0;
                for (ri, wi) in r.iter_mut().zip(&w) {
                    *ri -= wi * step0;
                }
                max_change = max_change.max(step0.abs());
            }

            for j in 0..d {
                if !full_sweep && !active[j] {
                    continue;
                }
                if hjj[j] <= 1e-14 {
                    continue;
                }
                let col = &cols[j];
                let gj = -scale * dot(col, &r);
                let old = new[j];
                let next = soft_threshold(hjj[j] * old - gj, lambda) / hjj[j];
                let delta = next - old;
                if delta != 0.0 {
                    new[j] = next;
                    active[j] = true;
                    for ((ri, wi), x) in r.iter_mut().zip(&w).zip(col) {
                        *ri -= wi * x * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }

            let settled = max_change < opts.tol * 0.1;
            if settled && full_sweep {
                break;
            }
            // Converge on the active set, then confirm with one full sweep.
            full_sweep = settled;
            if inner >= opts.max_inner {
                break;
            }
        }

        // Backtrack along the proposed step until the objective decreases.
        let d0 = new0 - beta0;
        let dbeta: Vec<f64> = new.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let deta: Vec<f64> = data.features.iter().map(|x| d0 + dot(&dbeta, x)).collect();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand0 = beta0 + t * d0;
            let cand: Vec<f64> = beta.iter().zip(&dbeta).map(|(b, db)| b + t * db).collect();
            let cand_eta: Vec<f64> = eta.iter().zip(&deta).map(|(e, de)| e + t * de).collect();
            let dev: f64 = cand_eta
                .iter()
                .zip(&y)
                .map(|(&e, &yi)| -2.0 * (yi * e - softplus(e)))
                .sum();
            let obj = dev / n as f64 + lambda * cand.iter().map(|b| b.abs()).sum::<f64>();
            if obj <= objective + 1e-12 * objective.abs().max(1.0) {
                accepted = Some((cand0, cand, cand_eta, obj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand0, cand, cand_eta, obj)) = accepted else {
            stalled = true;
            break;
        };
        let change = cand
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold((cand0 - beta0).abs(), f64::max);
        beta0 = cand0;
        beta = cand;
        eta = cand_eta;
        objective = obj;
        if !beta0.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonConvergence {
                iterations: opts.max_outer,
            });
        }
        if change < opts.tol {
            return Ok(LassoGlmModel {
                beta0,
                beta,
                lambda,
            });
        }
    }
    if !stalled {
        return Err(Error::NonConvergence {
            iterations: opts.max_outer,
        });
    }
    // No descent along the Newton step: accept if first-order optimal.
    let (g0, g) = deviance_gradient(data, beta0, &beta);
    let kkt = g
        .iter()
        .zip(&beta)
        .map(|(gj, bj)| {
            if *bj != 0.0 {
                (gj + lambda * bj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(g0.abs(), f64::max);
    if kkt < 1e-6 {
        Ok(LassoGlmModel {
            beta0,
            beta,
            lambda,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: opts.max_outer,
        })
    }
}

/// Linear predictor `beta0 + x.beta`, monotone in the P300 probability.
pub fn score_lasso_glm(model: &LassoGlmModel, x: &[f64]) -> Result<f64> {
    check_dim(model.beta.len(), x)?;
    Ok(model.beta0 + dot(&model.beta, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let m = LassoGlmModel {
            beta0: -0.7,
            beta: vec![0.0; 3],
            lambda: 0.1,
        };
        assert_eq!(score_lasso_glm(&m, &[4.0, -1.0, 2.0]).unwrap(), -0.7);
        let m = LassoGlmModel {
            beta: vec![1.0, 2.0, 3.0],
            ..m
        };
        assert_eq!(score_lasso_glm(&m, &[0.0; 3]).unwrap(), -0.7);
        assert!(score_lasso_glm(&m, &[0.0; 2]).is_err());
    }

    #[test]
    fn rejects_negative_lambda() {
        let rows = [vec![1.0], vec![-1.0]];
        let data = TrainingSet::new(rows.iter().map(Vec::as_slice).collect(), vec![true, false]).unwrap();
        assert!(train_lasso_glm(&data, -1.0).is_err());
    }

    #[test]
    fn separable_unpenalized_fit_does_not_converge() {
        let rows = [vec![1.0], vec![2.0], vec![-1.0], vec![-2.0]];
        let data = TrainingSet::new(
            rows.iter().map(Vec::as_slice).collect(),
            vec![true, true, false, false],
        )
        .unwrap();
        let opts = LassoOptions {
            max_outer: 30,
            ..LassoOptions::default()
        };
        assert!(matches!(
            train_lasso_glm_from(&data, 0.0, None, opts),
            Err(Error::NonConvergence { .. })
        ));
        // Any positive penalty keeps the coefficients bounded.
        assert!(train_lasso_glm(&data, 0.05).is_ok());
    }
}
