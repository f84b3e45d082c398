mod common;

use p300_core::dsp::{
    design_butterworth_bandpass, design_butterworth_bandpass_sos, design_butterworth_bandpass_zpk, BandpassSpec,
};
use p300_core::Error;

const FS: f64 = 2048.0;

#[test]
fn magnitude_matches_analog_prototype_at_100_frequencies() {
    let sos = design_butterworth_bandpass_sos(&BandpassSpec::standard(FS)).unwrap();
    for k in 0..100 {
        // Log-spaced from 0.1 Hz to 500 Hz.
        let f = 0.1 * (5000.0f64).powf(k as f64 / 99.0);
        let want = common::butterworth_bandpass_magnitude(3, 1.0, 12.0, FS, f);
        let got = sos.magnitude(f, FS);
        assert!((got - want).abs() < 1e-6, "{f} Hz: {got} vs {want}");
    }
}

#[test]
fn passband_and_stopband_levels() {
    let sos = design_butterworth_bandpass_sos(&BandpassSpec::standard(FS)).unwrap();
    assert!(sos.magnitude(12f64.sqrt(), FS) >= 0.95);
    assert!(sos.magnitude(0.0, FS) < 1e-3);
    assert!(sos.magnitude(50.0, FS) < 0.05);
}

#[test]
fn sections_polynomial_and_zpk_forms_agree() {
    for fs in [128.0, 256.0, FS] {
        let spec = BandpassSpec::standard(fs);
        let zpk = design_butterworth_bandpass_zpk(&spec).unwrap();
        assert!(zpk.is_stable());
        let sos = design_butterworth_bandpass_sos(&spec).unwrap();
        let coeffs = design_butterworth_bandpass(&spec).unwrap();
        for k in 1..50 {
            let f = k as f64 * fs / 100.0;
            let exact = zpk.response(f, fs);
            assert!((sos.frequency_response(f, fs) - exact).norm() < 1e-12, "fs {fs}, {f} Hz");
            // The expanded polynomial loses digits when the band is narrow
            // relative to fs; it stays within 1e-5.
            assert!((coeffs.frequency_response(f, fs) - exact).norm() < 1e-5, "fs {fs}, {f} Hz");
        }
    }
}

#[test]
fn impulse_response_decays_and_reproduces_the_response() {
    let sos = design_butterworth_bandpass_sos(&BandpassSpec::standard(FS)).unwrap();
    let mut impulse = vec![0.0; 40_000];
    impulse[0] = 1.0;
    let h = sos.filter(&impulse);
    let tail = h[10_000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(tail < 1e-8, "tail {tail}");
    for f in [0.5, 2.0, 3.464, 8.0, 20.0, 50.0] {
        let want = common::butterworth_bandpass_magnitude(3, 1.0, 12.0, FS, f);
        let got = common::dtft_magnitude(&h, f, FS);
        assert!((got - want).abs() < 1e-6, "{f} Hz: {got} vs {want}");
    }
}

#[test]
fn invalid_bands_are_rejected() {
    assert!(matches!(BandpassSpec::new(3, 12.0, 1.0, FS), Err(Error::InvalidBand(_))));
    assert!(matches!(BandpassSpec::new(3, 1.0, 20.0, 32.0), Err(Error::InvalidBand(_))));
    assert!(matches!(BandpassSpec::new(0, 1.0, 12.0, FS), Err(Error::InvalidBand(_))));
}
