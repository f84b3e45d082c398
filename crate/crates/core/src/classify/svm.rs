//! Soft-margin linear SVM with an unregularized bias.
//!
//! Minimizes `||w||^2 / 2 + C * sum_i max(0, 1 - y_i (w.x_i + b))` through
//! its dual `min a'Qa / 2 - sum a` subject to `0 <= a_i <= C` and
//! `sum a_i y_i = 0`, solved by sequential minimal optimization with
//! second-order working-set selection. Every step minimizes the dual
//! exactly over a feasible pair, so the dual objective never increases.
//!
//! Larger problems go to a primal-dual interior-point method on the same
//! dual, whose cost per step is independent of how many multipliers end up
//! free.
//!
//! With `w` fixed, the hinge term is convex piecewise linear in `b`; the
//! bias is taken from its exact minimizing interval.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_dim, dot, TrainingSet};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

const DIAG_FLOOR: f64 = 1e-10;

/// Training sets up to this size go to the pair solver.
pub const SMO_MAX_ROWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// Stop when the maximal KKT violation falls below this.
    pub tol: f64,
    /// Cap on pair steps (pair solver).
    pub max_iterations: usize,
    /// Relative residual and gap tolerance of the interior-point solver.
    pub ipm_tol: f64,
    pub ipm_max_iterations: usize,
    /// Budget for cached kernel rows, in bytes.
    pub cache_bytes: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            tol: 1e-6,
            max_iterations: 10_000_000,
            ipm_tol: 1e-9,
            ipm_max_iterations: 200,
            cache_bytes: 256 << 20,
        }
    }
}

/// Dual objective after each solver iteration.
#[derive(Debug, Clone, Default)]
pub struct SvmTrace {
    pub dual_objectives: Vec<f64>,
}

/// Primal objective of `(w, b)` on the training set.
pub fn svm_objective(data: &TrainingSet<'_>, c: f64, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, &l)| {
            let y = if l { 1.0 } else { -1.0 };
            (1.0 - y * (dot(w, x) + b)).max(0.0)
        })
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Rows of the linear kernel, computed on demand with FIFO eviction.
struct KernelRows<'d, 'a> {
    data: &'d TrainingSet<'a>,
    rows: HashMap<usize, Arc<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'d, 'a> KernelRows<'d, 'a> {
    fn new(data: &'d TrainingSet<'a>, cache_bytes: usize) -> Self {
        let row_bytes = data.len() * std::mem::size_of::<f64>();
        KernelRows {
            data,
            rows: HashMap::new(),
            order: VecDeque::new(),
            capacity: (cache_bytes / row_bytes.max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.rows.get(&i) {
            return Arc::clone(r);
        }
        let xi = self.data.features[i];
        let row = Arc::new(self.data.features.iter().map(|xk| dot(xi, xk)).collect::<Vec<_>>());
        if self.rows.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        self.rows.insert(i, Arc::clone(&row));
        self.order.push_back(i);
        row
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!("C must be positive, got {c}")));
    }
    Ok(())
}

fn signs(data: &TrainingSet<'_>) -> Vec<f64> {
    data.labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect()
}

/// Trains with default solver options, picking the solver by size.
pub fn train_linear_svm(data: &TrainingSet<'_>, c: f64) -> Result<LinearSvmModel> {
    train_linear_svm_with(data, c, SvmOptions::default())
}

pub fn train_linear_svm_with(data: &TrainingSet<'_>, c: f64, opts: SvmOptions) -> Result<LinearSvmModel> {
    if data.len() <= SMO_MAX_ROWS {
        train_linear_svm_traced(data, c, opts, None)
    } else {
        train_linear_svm_ipm(data, c, opts)
    }
}

/// Pair solver from zero; optionally records the dual objective per
/// iteration.
pub fn train_linear_svm_traced(
    data: &TrainingSet<'_>,
    c: f64,
    opts: SvmOptions,
    trace: Option<&mut SvmTrace>,
) -> Result<LinearSvmModel> {
    data.validate()?;
    check_c(c)?;
    smo(data, c, opts, trace)
}

fn weights(data: &TrainingSet<'_>, alpha: &[f64], y: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; data.dim()];
    for ((x, a), yi) in data.features.iter().zip(alpha).zip(y) {
        if *a != 0.0 {
            for (wj, xj) in w.iter_mut().zip(x.iter()) {
                *wj += a * yi * xj;
            }
        }
    }
    w
}

fn smo(
    data: &TrainingSet<'_>,
    c: f64,
    opts: SvmOptions,
    mut trace: Option<&mut SvmTrace>,
) -> Result<LinearSvmModel> {
    let n = data.len();
    let y = signs(data);
    let diag: Vec<f64> = data.features.iter().map(|x| dot(x, x)).collect();
    let mut kernel = KernelRows::new(data, opts.cache_bytes);
    // Gradient of the dual: Q a - 1.
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut converged = false;
    for _ in 0..opts.max_iterations {
        // i: maximal violator in I_up.
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && v >= g_max {
                g_max = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let row_i = kernel.row(i);

        // j: second-order choice in I_low.
        let mut g_max2 = f64::NEG_INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            g_max2 = g_max2.max(v);
            let grad_diff = g_max + v;
            if grad_diff > 0.0 {
                let quad = diag[i] + diag[t] - 2.0 * row_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -grad_diff * grad_diff / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| g_max + g_max2 >= opts.tol) else {
            converged = true;
            break;
        };
        let row_j = kernel.row(j);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * row_i[j];
        if y[i] != y[j] {
            let quad = diag[i] + diag[j] + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = diag[i] + diag[j] - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
        if let Some(tr) = trace.as_deref_mut() {
            let f: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() * 0.5;
            tr.dual_objectives.push(f);
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: opts.max_iterations,
        });
    }

    let w = weights(data, &alpha, &y);
    let b = best_bias(data, &w, &y, rho_bias(&alpha, &grad, &y, c));
    Ok(LinearSvmModel { w, b, c })
}

/// Primal-dual interior-point solver for the same dual, with Mehrotra
/// predictor-corrector steps. `Q = V V'` with `V = diag(y) X` has rank `d`,
/// so each Newton system `(Q + D) da + y db = r` is solved through the
/// Woodbury identity with one `d x d` Cholesky factor; a step costs
/// `O(n d^2)` and the step count hardly depends on `C`.
pub fn train_linear_svm_ipm(data: &TrainingSet<'_>, c: f64, opts: SvmOptions) -> Result<LinearSvmModel> {
    data.validate()?;
    check_c(c)?;
    let n = data.len();
    let d = data.dim();
    let y = DVector::from_vec(signs(data));
    let v = DMatrix::from_fn(n, d, |i, j| y[i] * data.features[i][j]);
    let ones = DVector::from_element(n, 1.0);
    let row_norms: Vec<f64> = data.features.iter().map(|x| dot(x, x)).collect();

    let mut alpha = DVector::from_element(n, c / 2.0);
    let mut z = DVector::from_element(n, 1.0);
    let mut u = DVector::from_element(n, 1.0);
    let mut b = 0.0;

    for iteration in 0..opts.ipm_max_iterations {
        let slack = alpha.map(|a| c - a);
        let q_alpha = &v * (v.tr_mul(&alpha));
        // Dual residual Q a - 1 + b y - z + u, equality residual y'a.
        let r_d = &q_alpha - &ones + &y * b - &z + &u;
        let r_e = y.dot(&alpha);
        let mu = (alpha.dot(&z) + slack.dot(&u)) / (2 * n) as f64;
        let scale = 1.0 + q_alpha.amax();
        let within = |tol: f64| {
            r_d.amax() <= tol * scale && r_e.abs() <= tol * c.max(1.0) && mu <= tol * c.min(1.0)
        };
        let finish = |alpha: &DVector<f64>| {
            log::debug!("svm interior point: {iteration} iterations");
            let w: Vec<f64> = v.tr_mul(alpha).iter().copied().collect();
            let y_vec: Vec<f64> = y.iter().copied().collect();
            let b = best_bias(data, &w, &y_vec, b);
            LinearSvmModel { w, b, c }
        };
        if within(opts.ipm_tol) {
            return Ok(finish(&alpha));
        }

        // Free multipliers drive the barrier term to zero; the floor keeps
        // the Woodbury inner matrix numerically positive definite.
        let diag = DVector::from_fn(n, |i, _| {
            (z[i] / alpha[i] + u[i] / slack[i]).max(DIAG_FLOOR * (1.0 + row_norms[i]))
        });
        let inv_diag = diag.map(|x| 1.0 / x);
        let scaled = DMatrix::from_fn(n, d, |i, j| v[(i, j)] * inv_diag[i].sqrt());
        let mut inner = scaled.tr_mul(&scaled);
        for k in 0..d {
            inner[(k, k)] += 1.0;
        }
        let Some(chol) = inner.cholesky() else {
            if within(opts.ipm_tol.sqrt()) {
                return Ok(finish(&alpha));
            }
            return Err(Error::NonConvergence { iterations: iteration });
        };
        let solve = |rhs: &DVector<f64>| -> DVector<f64> {
            let t = rhs.component_mul(&inv_diag);
            let corr = chol.solve(&v.tr_mul(&t));
            &t - (&v * corr).component_mul(&inv_diag)
        };
        let m_inv_y = solve(&y);
        let y_m_y = y.dot(&m_inv_y);

        // Newton direction for complementarity targets t_low (a z) and t_up (s u).
        let direction = |t_low: &DVector<f64>, t_up: &DVector<f64>| {
            let low = DVector::from_fn(n, |i, _| (t_low[i] - alpha[i] * z[i]) / alpha[i]);
            let up = DVector::from_fn(n, |i, _| (t_up[i] - slack[i] * u[i]) / slack[i]);
            let r = -&r_d + &low - &up;
            let m_inv_r = solve(&r);
            let db = (y.dot(&m_inv_r) + r_e) / y_m_y;
            let da = &m_inv_r - &m_inv_y * db;
            let dz = DVector::from_fn(n, |i, _| low[i] - z[i] * da[i] / alpha[i]);
            let du = DVector::from_fn(n, |i, _| up[i] + u[i] * da[i] / slack[i]);
            (da, db, dz, du)
        };
        let step = |da: &DVector<f64>, dz: &DVector<f64>, du: &DVector<f64>| {
            let mut t: f64 = 1.0;
            for i in 0..n {
                if da[i] < 0.0 {
                    t = t.min(-alpha[i] / da[i]);
                } else if da[i] > 0.0 {
                    t = t.min(slack[i] / da[i]);
                }
                if dz[i] < 0.0 {
                    t = t.min(-z[i] / dz[i]);
                }
                if du[i] < 0.0 {
                    t = t.min(-u[i] / du[i]);
                }
            }
            t
        };

        let zero = DVector::zeros(n);
        let (da, _, dz, du) = direction(&zero, &zero);
        let t_aff = step(&da, &dz, &du);
        let mu_aff = ((&alpha + &da * t_aff).dot(&(&z + &dz * t_aff))
            + (&slack - &da * t_aff).dot(&(&u + &du * t_aff)))
            / (2 * n) as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);
        let t_low = DVector::from_fn(n, |i, _| sigma * mu - da[i] * dz[i]);
        let t_up = DVector::from_fn(n, |i, _| sigma * mu + da[i] * du[i]);
        let (da, db, dz, du) = direction(&t_low, &t_up);
        let t = (0.995 * step(&da, &dz, &du)).min(1.0);
        alpha += &da * t;
        z += &dz * t;
        u += &du * t;
        b += db * t;
    }
    Err(Error::NonConvergence {
        iterations: opts.ipm_max_iterations,
    })
}

/// Bias implied by the dual solution: averaged over free multipliers, or
/// the midpoint of the feasible range when none are free.
fn rho_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut n_free) = (0.0, 0usize);
    for ((&a, &g), &yi) in alpha.iter().zip(grad).zip(y) {
        let yg = yi * g;
        if a >= c {
            if yi < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a <= 0.0 {
            if yi > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum += yg;
        }
    }
    let rho = if n_free > 0 {
        sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    -rho
}

/// Moves `hint` into the interval of biases minimizing the hinge sum for
/// fixed `w`. Each term has one breakpoint at `y_i - w.x_i` and the slope
/// rises by one per breakpoint from `-n_pos`, so the minimizers lie between
/// the `n_pos`-th and `(n_pos + 1)`-th smallest breakpoints.
fn best_bias(data: &TrainingSet<'_>, w: &[f64], y: &[f64], hint: f64) -> f64 {
    let mut breaks: Vec<f64> = data
        .features
        .iter()
        .zip(y)
        .map(|(x, yi)| yi - dot(w, x))
        .collect();
    breaks.sort_by(f64::total_cmp);
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let lo = breaks[n_pos - 1];
    let hi = breaks[n_pos];
    if hint.is_finite() {
        hint.clamp(lo, hi)
    } else {
        (lo + hi) / 2.0
    }
}

/// `w.x + b`.
pub fn score_linear_svm(model: &LinearSvmModel, x: &[f64]) -> Result<f64> {
    check_dim(model.w.len(), x)?;
    Ok(dot(&model.w, x) + model.b)
}
