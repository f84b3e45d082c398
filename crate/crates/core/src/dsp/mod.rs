//! Epoch preprocessing: bandpass filtering, resampling to 32 Hz,
//! winsorizing, normalization and feature-vector assembly.

mod butterworth;
mod pipeline;

pub use butterworth::{
    design_butterworth_bandpass, design_butterworth_bandpass_sos, design_butterworth_bandpass_zpk,
    filter_signal, BandpassSpec, IirCoefficients, SosFilter, ZpkDesign,
};
pub use pipeline::{
    normalize_unit_range, order_statistic_percentile, preprocess_epoch, preprocess_set,
    resample_to, winsorize, FeatureVector, Preprocessor, WinsorizeSpec, FEATURE_RATE_HZ,
    FEATURE_TIME_SAMPLES,
};
