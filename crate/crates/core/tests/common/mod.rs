//! Reference implementations used as test oracles. Each one is written
//! independently of the library code it checks.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|H|` of a digital Butterworth bandpass built by the bilinear transform
/// with prewarped edges, from the closed-form analog magnitude
/// `1 / sqrt(1 + ((W^2 - W0^2) / (W B))^(2n))` at the warped frequency.
pub fn butterworth_bandpass_magnitude(order: usize, low: f64, high: f64, fs: f64, f: f64) -> f64 {
    let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
    let (wl, wh, w) = (warp(low), warp(high), warp(f));
    if w == 0.0 {
        return 0.0;
    }
    let ratio = (w * w - wl * wh) / (w * (wh - wl));
    1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
}

/// Discrete-time Fourier transform magnitude of a finite sequence.
pub fn dtft_magnitude(x: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * PI * f / fs;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        re += v * (w * n as f64).cos();
        im -= v * (w * n as f64).sin();
    }
    (re * re + im * im).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn svm_primal(rows: &[Vec<f64>], y: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, yi)| (1.0 - yi * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Euclidean projection onto `{0 <= a <= C, y'a = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |tau: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - tau * yi).clamp(0.0, c))
            .collect()
    };
    let g = |tau: f64| dot(&at(tau), y);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Optimal soft-margin objective: accelerated projected gradient on the
/// dual, then the primal value at `w(a)` with the bias chosen by scanning
/// every hinge breakpoint. Returns `(primal, dual lower bound)`.
pub fn svm_oracle(rows: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> (f64, f64) {
    let n = rows.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * dot(&rows[i], &rows[j]));
    let lip = q.symmetric_eigenvalues().max().max(1e-12);
    let grad = |a: &DVector<f64>| &q * a - DVector::from_element(n, 1.0);
    let dual = |a: &DVector<f64>| 0.5 * a.dot(&(&q * a)) - a.sum();

    let mut a = DVector::zeros(n);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = f64::INFINITY;
    for _ in 0..iterations {
        let step = &z - grad(&z) / lip;
        let next = DVector::from_vec(project(step.as_slice(), y, c));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        // Restart the momentum when the objective goes up.
        if dual(&next) > dual(&a) {
            z = a.clone();
            t = 1.0;
            continue;
        }
        z = &next + (&next - &a) * ((t - 1.0) / t_next);
        a = next;
        t = t_next;
        best = best.min(dual(&a));
    }
    let d = rows[0].len();
    let mut w = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            w[j] += a[i] * y[i] * rows[i][j];
        }
    }
    let primal = rows
        .iter()
        .zip(y)
        .map(|(x, yi)| svm_primal(rows, y, c, &w, yi - dot(&w, x)))
        .fold(f64::INFINITY, f64::min);
    (primal, -best)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Unregularized logistic regression by Newton's method on the
/// log-likelihood; returns `(intercept, coefficients)`.
pub fn logistic_newton(rows: &[Vec<f64>], labels: &[bool]) -> (f64, Vec<f64>) {
    let n = rows.len();
    let d = rows[0].len() + 1;
    let x = DMatrix::from_fn(n, d, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let yv = DVector::from_fn(n, |i, _| if labels[i] { 1.0 } else { 0.0 });
    let mut beta = DVector::zeros(d);
    for _ in 0..100 {
        let p = (&x * &beta).map(sigmoid);
        let grad = x.transpose() * (&yv - &p);
        let wts = p.map(|v| v * (1.0 - v));
        let h = DMatrix::from_fn(d, d, |a, b| (0..n).map(|i| x[(i, a)] * x[(i, b)] * wts[i]).sum());
        let step = h.lu().solve(&grad).expect("well-conditioned instance");
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    (beta[0], beta.iter().skip(1).copied().collect())
}

/// `max_j |d/d beta_j (Deviance / N)|` at the intercept-only fit.
pub fn lambda_max_oracle(rows: &[Vec<f64>], labels: &[bool]) -> f64 {
    let n = rows.len() as f64;
    let p = labels.iter().filter(|&&l| l).count() as f64 / n;
    (0..rows[0].len())
        .map(|j| {
            let g: f64 = rows
                .iter()
                .zip(labels)
                .map(|(x, &l)| x[j] * ((if l { 1.0 } else { 0.0 }) - p))
                .sum();
            (2.0 * g / n).abs()
        })
        .fold(0.0, f64::max)
}

/// Random two-class data: `n` rows of dimension `d`, positives shifted by
/// `shift` along every axis.
pub fn two_class(seed: u64, n: usize, d: usize, shift: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut r = rng(seed);
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0 || r.random_bool(0.2)).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            (0..d)
                .map(|_| r.random_range(-1.0..1.0) + if l { shift } else { 0.0 })
                .collect()
        })
        .collect();
    (rows, labels)
}
