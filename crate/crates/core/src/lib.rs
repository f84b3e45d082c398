//! P300 detection pipeline: EEG epoching and preprocessing, three linear
//! classifiers, sequence-level cross-validated evaluation, synthetic
//! sessions and on-disk formats.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod synth;

pub use classify::{train, ClassifierFamily, Scorer, TrainedClassifier, TrainingSet};
pub use dataset::{
    ElectrodeMontage, Epoch, EpochSet, MontageName, Paradigm, Recording, SequenceEntry,
    SequenceRecord, Stage, StimulusEvent,
};
pub use dsp::{FeatureVector, Preprocessor};
pub use error::{Error, Result};
pub use eval::{AccuracyCurve, ComparisonTable, CvResult, FoldPlan};
pub use io::{EpochContainer, RunConfig};
pub use synth::{SynthSession, SynthSpec};
