//! Butterworth bandpass design by bilinear transform with pre-warping, and
//! causal filtering as a cascade of second-order sections.
//!
//! Narrow bands at high sample rates put every pole close to `z = 1`, and
//! expanding them into one transfer-function polynomial loses several
//! digits. Second-order sections keep the poles apart.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Bandpass design request. `order` is the analog prototype order; the
/// digital filter has `2 * order` poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate_hz: f64,
}

impl BandpassSpec {
    pub fn new(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let spec = BandpassSpec {
            order,
            low_hz,
            high_hz,
            sample_rate_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Third-order 1-12 Hz band at the given sample rate.
    pub fn standard(sample_rate_hz: f64) -> Self {
        BandpassSpec {
            order: 3,
            low_hz: 1.0,
            high_hz: 12.0,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidBand("order must be at least 1".into()));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(Error::InvalidBand(format!(
                "need 0 < {} < {} < {nyquist}",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }
}

/// Zeros, poles and gain of a digital filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ZpkDesign {
    pub zeros: Vec<C64>,
    pub poles: Vec<C64>,
    pub gain: f64,
}

impl ZpkDesign {
    /// `H(e^{jw})` evaluated as a product over zeros and poles.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> C64 {
        let z = C64::from_polar(1.0, 2.0 * PI * freq_hz / sample_rate_hz);
        let num = self.zeros.iter().fold(C64::new(self.gain, 0.0), |acc, q| acc * (z - q));
        let den = self.poles.iter().fold(C64::new(1.0, 0.0), |acc, p| acc * (z - p));
        num / den
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.norm() < 1.0)
    }

    /// Expands to transfer-function coefficients in powers of `z^-1`.
    pub fn to_coefficients(&self) -> IirCoefficients {
        let b = poly_from_roots(&self.zeros)
            .into_iter()
            .map(|c| c * self.gain)
            .collect();
        let a = poly_from_roots(&self.poles);
        IirCoefficients { b, a }
    }
}

/// Coefficients of `prod (1 - r z^-1)`; the imaginary parts cancel for
/// conjugate-symmetric root sets and are dropped.
fn poly_from_roots(roots: &[C64]) -> Vec<f64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

/// Transfer function `B(z^-1) / A(z^-1)` with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl IirCoefficients {
    /// Evaluates both polynomials at `z^-1 = e^{-jw}` by Horner's rule.
    pub fn frequency_response(&self, freq_hz: f64, sample_rate_hz: f64) -> C64 {
        let zinv = C64::from_polar(1.0, -2.0 * PI * freq_hz / sample_rate_hz);
        let horner = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(C64::new(0.0, 0.0), |acc, &ci| acc * zinv + ci)
        };
        horner(&self.b) / horner(&self.a)
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.frequency_response(freq_hz, sample_rate_hz).norm()
    }
}

/// Digital Butterworth bandpass in zero-pole-gain form.
pub fn design_butterworth_bandpass_zpk(spec: &BandpassSpec) -> Result<ZpkDesign> {
    spec.validate()?;
    let n = spec.order;
    let fs2 = 2.0 * spec.sample_rate_hz;
    let warp = |f: f64| fs2 * (PI * f / spec.sample_rate_hz).tan();
    let (w_lo, w_hi) = (warp(spec.low_hz), warp(spec.high_hz));
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    // Analog lowpass prototype: unit-circle poles in the left half-plane.
    let prototype = (0..n).map(|k| {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        C64::from_polar(1.0, theta)
    });

    // Lowpass -> bandpass: each pole p splits into the roots of
    // s^2 - p*bw*s + w0^2; n zeros land at s = 0 and n at infinity.
    let mut analog_poles = Vec::with_capacity(2 * n);
    for p in prototype {
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        analog_poles.push(half + disc);
        analog_poles.push(half - disc);
    }
    let analog_gain = bw.powi(n as i32);

    // Bilinear transform.
    let poles: Vec<C64> = analog_poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let mut zeros = vec![C64::new(1.0, 0.0); n];
    zeros.extend(std::iter::repeat_n(C64::new(-1.0, 0.0), n));
    let den = analog_poles
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
    let gain = analog_gain * (fs2.powi(n as i32) / den).re;

    Ok(ZpkDesign { zeros, poles, gain })
}

/// Digital Butterworth bandpass as transfer-function coefficients.
pub fn design_butterworth_bandpass(spec: &BandpassSpec) -> Result<IirCoefficients> {
    design_butterworth_bandpass_zpk(spec).map(|zpk| zpk.to_coefficients())
}

/// Groups roots into conjugate pairs; real roots are paired largest with
/// smallest. Each pair becomes `[1, -(r1 + r2), r1 r2]` in powers of
/// `z^-1`; a leftover real root gives `[1, -r, 0]`.
fn root_pairs(roots: &[C64]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    let mut real: Vec<f64> = Vec::new();
    for r in roots {
        if r.im.abs() <= 1e-12 * r.norm().max(1.0) {
            real.push(r.re);
        } else if r.im > 0.0 {
            out.push([1.0, -2.0 * r.re, r.norm_sqr()]);
        }
    }
    real.sort_by(|a, b| b.total_cmp(a));
    let (mut i, mut j) = (0, real.len());
    while i + 1 < j {
        j -= 1;
        out.push([1.0, -(real[i] + real[j]), real[i] * real[j]]);
        i += 1;
    }
    if i < j {
        out.push([1.0, -real[i], 0.0]);
    }
    out
}

/// Cascade of biquads; section `k` is `B_k(z^-1) / A_k(z^-1)` with
/// `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<([f64; 3], [f64; 3])>,
}

impl SosFilter {
    /// Pairs conjugate poles into sections, one zero pair each, with the
    /// overall gain folded into the first numerator.
    pub fn from_zpk(zpk: &ZpkDesign) -> Self {
        let den = root_pairs(&zpk.poles);
        let mut num = root_pairs(&zpk.zeros);
        num.resize(den.len().max(num.len()), [1.0, 0.0, 0.0]);
        let mut sections: Vec<([f64; 3], [f64; 3])> = num
            .into_iter()
            .zip(den.into_iter().chain(std::iter::repeat([1.0, 0.0, 0.0])))
            .collect();
        if let Some(first) = sections.first_mut() {
            first.0.iter_mut().for_each(|c| *c *= zpk.gain);
        }
        SosFilter { sections }
    }

    pub fn frequency_response(&self, freq_hz: f64, sample_rate_hz: f64) -> C64 {
        let zinv = C64::from_polar(1.0, -2.0 * PI * freq_hz / sample_rate_hz);
        let eval = |c: &[f64; 3]| (C64::new(c[2], 0.0) * zinv + c[1]) * zinv + c[0];
        self.sections
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, (b, a)| acc * eval(b) / eval(a))
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        self.frequency_response(freq_hz, sample_rate_hz).norm()
    }

    /// Causal filtering from zero state, section by section in transposed
    /// direct form II.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (b, a) in &self.sections {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let xn = *v;
                let yn = b[0] * xn + s1;
                s1 = b[1] * xn - a[1] * yn + s2;
                s2 = b[2] * xn - a[2] * yn;
                *v = yn;
            }
        }
        y
    }
}

/// Digital Butterworth bandpass as second-order sections.
pub fn design_butterworth_bandpass_sos(spec: &BandpassSpec) -> Result<SosFilter> {
    design_butterworth_bandpass_zpk(spec).map(|zpk| SosFilter::from_zpk(&zpk))
}

/// Causal transposed direct-form II filtering from zero initial state.
pub fn filter_signal(x: &[f64], coeffs: &IirCoefficients) -> Vec<f64> {
    let order = coeffs.a.len().max(coeffs.b.len());
    let a0 = coeffs.a[0];
    let b: Vec<f64> = (0..order)
        .map(|i| coeffs.b.get(i).copied().unwrap_or(0.0) / a0)
        .collect();
    let a: Vec<f64> = (0..order)
        .map(|i| coeffs.a.get(i).copied().unwrap_or(0.0) / a0)
        .collect();
    let mut state = vec![0.0; order];
    x.iter()
        .map(|&xn| {
            let yn = b[0] * xn + state[0];
            for i in 1..order {
                let next = if i + 1 < order { state[i] } else { 0.0 };
                state[i - 1] = b[i] * xn - a[i] * yn + next;
            }
            yn
        })
        .collect()
}
