//! Inner cross-validation for the SVM `C` and the lasso `lambda`.
//!
//! Examples are split into folds by index (`i % INNER_FOLDS`) and candidates
//! ranked by mean held-out ROC AUC, which is insensitive to the 1:5 class
//! skew. Ties go to the first candidate in grid order.

use log::warn;
use rayon::prelude::*;

use super::lasso::{lasso_lambda_max, score_lasso_glm, train_lasso_glm_from, LassoOptions};
use super::svm::{score_linear_svm, train_linear_svm};
use super::TrainingSet;
use crate::error::{Error, Result};

pub const INNER_FOLDS: usize = 5;

pub const SVM_C_GRID: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];

const LAMBDA_PATH_LEN: usize = 20;
const LAMBDA_MIN_RATIO: f64 = 1e-3;

/// Area under the ROC curve (Mann-Whitney, ties counted half). `None` if
/// one class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn inner_splits(data: &TrainingSet<'_>) -> Result<Vec<Split>> {
    let n = data.len();
    let splits: Vec<Split> = (0..INNER_FOLDS)
        .map(|f| {
            let (test, train) = (0..n).partition(|i| i % INNER_FOLDS == f);
            Split { train, test }
        })
        .filter(|s| {
            let sub = data.subset(&s.train);
            let pos = sub.n_positive();
            pos >= 2 && sub.len() - pos >= 2 && !s.test.is_empty()
        })
        .collect();
    if splits.is_empty() {
        return Err(Error::InvalidTrainingSet(
            "too few examples per class for inner cross-validation".into(),
        ));
    }
    Ok(splits)
}

fn best_index(means: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in means.iter().enumerate() {
        if m > means[best] {
            best = i;
        }
    }
    best
}

fn mean_finite(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        f64::NEG_INFINITY
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Picks `C` from [`SVM_C_GRID`].
pub fn select_svm_c(data: &TrainingSet<'_>) -> Result<f64> {
    data.validate()?;
    let splits = inner_splits(data)?;
    let jobs: Vec<(usize, usize)> = (0..SVM_C_GRID.len())
        .flat_map(|c| (0..splits.len()).map(move |f| (c, f)))
        .collect();
    let aucs: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(ci, fi)| {
            let split = &splits[fi];
            let train = data.subset(&split.train);
            match train_linear_svm(&train, SVM_C_GRID[ci]) {
                Ok(model) => {
                    let scores: Vec<f64> = split
                        .test
                        .iter()
                        .map(|&i| score_linear_svm(&model, data.features[i]).unwrap_or(f64::NAN))
                        .collect();
                    let labels: Vec<bool> = split.test.iter().map(|&i| data.labels[i]).collect();
                    auc(&scores, &labels)
                }
                Err(e) => {
                    warn!("C = {} skipped in fold {fi}: {e}", SVM_C_GRID[ci]);
                    None
                }
            }
        })
        .collect();
    let means: Vec<f64> = (0..SVM_C_GRID.len())
        .map(|ci| mean_finite(aucs[ci * splits.len()..(ci + 1) * splits.len()].iter().copied()))
        .collect();
    if means.iter().all(|m| !m.is_finite()) {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    Ok(SVM_C_GRID[best_index(&means)])
}

/// Log-spaced path from `lambda_max` down to `1e-3 * lambda_max`.
pub fn lasso_lambda_path(lambda_max: f64) -> Vec<f64> {
    (0..LAMBDA_PATH_LEN)
        .map(|k| {
            lambda_max * LAMBDA_MIN_RATIO.powf(k as f64 / (LAMBDA_PATH_LEN - 1) as f64)
        })
        .collect()
}

/// Picks `lambda` from [`lasso_lambda_path`] of the full training set.
pub fn select_lasso_lambda(data: &TrainingSet<'_>) -> Result<f64> {
    data.validate()?;
    let lambda_max = lasso_lambda_max(data);
    if lambda_max == 0.0 {
        return Ok(0.0);
    }
    let path = lasso_lambda_path(lambda_max);
    let splits = inner_splits(data)?;
    let per_fold: Vec<Vec<Option<f64>>> = splits
        .par_iter()
        .map(|split| {
            let train = data.subset(&split.train);
            let labels: Vec<bool> = split.test.iter().map(|&i| data.labels[i]).collect();
            let mut warm = None;
            path.iter()
                .map(|&lambda| {
                    match train_lasso_glm_from(&train, lambda, warm.as_ref(), LassoOptions::default()) {
                        Ok(model) => {
                            let scores: Vec<f64> = split
                                .test
                                .iter()
                                .map(|&i| score_lasso_glm(&model, data.features[i]).unwrap_or(f64::NAN))
                                .collect();
                            warm = Some(model);
                            auc(&scores, &labels)
                        }
                        Err(e) => {
                            warn!("lambda = {lambda} skipped: {e}");
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = (0..path.len())
        .map(|k| mean_finite(per_fold.iter().map(|f| f[k])))
        .collect();
    if means.iter().all(|m| !m.is_finite()) {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    Ok(path[best_index(&means)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]), Some(0.0));
        assert_eq!(auc(&[0.5; 4], &[false, true, false, true]), Some(0.5));
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), Some(0.75));
        assert_eq!(auc(&[1.0], &[true]), None);
    }

    #[test]
    fn lambda_path_spans_three_decades() {
        let p = lasso_lambda_path(2.0);
        assert_eq!(p.len(), 20);
        assert_eq!(p[0], 2.0);
        assert!((p[19] - 2e-3).abs() < 1e-15);
        assert!(p.windows(2).all(|w| w[1] < w[0]));
    }

    fn noisy_set() -> (Vec<Vec<f64>>, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64;
                let signal = if i % 3 == 0 { 0.8 } else { -0.4 };
                vec![signal + (t * 1.7).sin(), (t * 0.37).cos(), (t * 2.3).sin() * 0.5]
            })
            .collect();
        let labels = (0..60).map(|i| i % 3 == 0).collect();
        (rows, labels)
    }

    #[test]
    fn selections_come_from_their_grids() {
        let (rows, labels) = noisy_set();
        let data = TrainingSet::new(rows.iter().map(Vec::as_slice).collect(), labels).unwrap();
        let c = select_svm_c(&data).unwrap();
        assert!(SVM_C_GRID.contains(&c));
        let lambda = select_lasso_lambda(&data).unwrap();
        assert!(lasso_lambda_path(lasso_lambda_max(&data)).contains(&lambda));
        assert_eq!(select_svm_c(&data).unwrap(), c);
    }
}
