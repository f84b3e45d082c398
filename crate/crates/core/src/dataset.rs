//! Recordings, stimulus events, epochs, electrode montages and sequences.
//!
//! A [`Recording`] is continuous multichannel EEG with a stimulus log. Epochs
//! are cut from it at each stimulus onset, restricted to an
//! [`ElectrodeMontage`], and after preprocessing grouped into
//! [`SequenceRecord`]s, the unit on which six-class decisions are made.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use log::{info, warn};

use crate::dsp::FeatureVector;
use crate::error::{Error, Result};

/// Number of stimulus classes in one six-class decision.
pub const N_CLASSES: usize = 6;

/// Epoch length used throughout the pipeline.
pub const EPOCH_WINDOW_MS: f64 = 1000.0;

/// Label pairs recognised as left/right mastoid electrodes.
pub const MASTOID_PAIRS: [[&str; 2]; 3] = [["M1", "M2"], ["A1", "A2"], ["TP9", "TP10"]];

/// How stimulus codes of a recording are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Paradigm {
    /// Six stimuli per decision; codes 0..=5, one target code per run.
    SixClass,
    /// 6x6 speller matrix; codes 0..=5 are rows, 6..=11 are columns, one
    /// target row and one target column per run.
    RowColumn,
}

impl Paradigm {
    pub fn n_codes(self) -> u8 {
        match self {
            Paradigm::SixClass => 6,
            Paradigm::RowColumn => 12,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::SixClass => "six_class",
            Paradigm::RowColumn => "row_column",
        }
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "six_class" => Ok(Paradigm::SixClass),
            "row_column" => Ok(Paradigm::RowColumn),
            other => Err(Error::InvalidRecording(format!("unknown paradigm {other:?}"))),
        }
    }
}

/// One stimulus presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StimulusEvent {
    pub onset_sample: usize,
    pub stimulus_class: u8,
    pub is_target: bool,
    pub run_id: u64,
    /// Repetition cycle within the run (the trial index).
    pub sequence_index: u32,
}

/// Continuous multichannel EEG plus its stimulus log.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    samples: Vec<Vec<f64>>,
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
    reference_note: String,
    events: Vec<StimulusEvent>,
    paradigm: Paradigm,
}

impl Recording {
    /// Builds a recording, checking every structural invariant.
    pub fn new(
        samples: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
        reference_note: impl Into<String>,
        events: Vec<StimulusEvent>,
        paradigm: Paradigm,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.len() != channel_labels.len() {
            return Err(Error::InvalidRecording(format!(
                "{} channel rows but {} labels",
                samples.len(),
                channel_labels.len()
            )));
        }
        let len = samples.first().map_or(0, Vec::len);
        if samples.iter().any(|row| row.len() != len) {
            return Err(Error::InvalidRecording("channel rows differ in length".into()));
        }
        let mut seen = HashSet::new();
        for label in &channel_labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidRecording(format!("duplicate channel {label:?}")));
            }
        }
        for ev in &events {
            if ev.onset_sample >= len {
                return Err(Error::InvalidRecording(format!(
                    "event onset {} outside recording of {len} samples",
                    ev.onset_sample
                )));
            }
        }
        check_event_labels(&events, paradigm)?;
        Ok(Recording {
            samples,
            sample_rate_hz,
            channel_labels,
            reference_note: reference_note.into(),
            events,
            paradigm,
        })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn reference_note(&self) -> &str {
        &self.reference_note
    }

    pub fn events(&self) -> &[StimulusEvent] {
        &self.events
    }

    pub fn paradigm(&self) -> Paradigm {
        self.paradigm
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Restricts the recording to the montage channels, in montage order.
    pub fn select_montage(&self, montage: &ElectrodeMontage) -> Result<Recording> {
        let idx = channel_indices(&self.channel_labels, &montage.channels)?;
        Ok(Recording {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            channel_labels: montage.channels.clone(),
            ..self.clone()
        })
    }
}

/// Per run, the target codes must be unique and consistent: exactly one
/// target class (six-class) or one target row plus one target column.
fn check_event_labels(events: &[StimulusEvent], paradigm: Paradigm) -> Result<()> {
    let mut targets: BTreeMap<u64, (BTreeSet<u8>, BTreeSet<u8>)> = BTreeMap::new();
    for ev in events {
        if ev.stimulus_class >= paradigm.n_codes() {
            return Err(Error::InvalidRecording(format!(
                "stimulus class {} out of range for {}",
                ev.stimulus_class,
                paradigm.as_str()
            )));
        }
        let entry = targets.entry(ev.run_id).or_default();
        if ev.is_target {
            entry.0.insert(ev.stimulus_class);
        } else {
            entry.1.insert(ev.stimulus_class);
        }
    }
    for (run, (tgt, non)) in &targets {
        if let Some(c) = tgt.intersection(non).next() {
            return Err(Error::InvalidRecording(format!(
                "run {run}: class {c} marked both target and non-target"
            )));
        }
        let ok = match paradigm {
            Paradigm::SixClass => tgt.len() == 1,
            Paradigm::RowColumn => {
                tgt.iter().filter(|&&c| c < 6).count() == 1
                    && tgt.iter().filter(|&&c| c >= 6).count() == 1
            }
        };
        if !ok {
            return Err(Error::InvalidRecording(format!(
                "run {run}: target classes {tgt:?} invalid for {}",
                paradigm.as_str()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MontageName {
    ConfigI,
    ConfigII,
    ConfigIII,
}

impl fmt::Display for MontageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MontageName::ConfigI => "CONFIG_I",
            MontageName::ConfigII => "CONFIG_II",
            MontageName::ConfigIII => "CONFIG_III",
        })
    }
}

const CONFIG_I: [&str; 4] = ["Fz", "Cz", "Pz", "Oz"];
const CONFIG_II_EXTRA: [&str; 4] = ["P3", "P4", "P7", "P8"];
const CONFIG_III_EXTRA: [&str; 8] = ["FC1", "FC2", "CP1", "CP2", "C3", "C4", "O1", "O2"];

/// A named, ordered electrode subset. The three configurations are nested:
/// each is a strict prefix-superset of the previous one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ElectrodeMontage {
    pub name: MontageName,
    pub channels: Vec<String>,
}

impl ElectrodeMontage {
    pub fn new(name: MontageName) -> Self {
        let extra: &[&str] = match name {
            MontageName::ConfigI => &[],
            MontageName::ConfigII => &CONFIG_II_EXTRA,
            MontageName::ConfigIII => &[&CONFIG_II_EXTRA[..], &CONFIG_III_EXTRA[..]].concat(),
        };
        let channels = CONFIG_I
            .iter()
            .chain(extra.iter())
            .map(|s| s.to_string())
            .collect();
        ElectrodeMontage { name, channels }
    }

    pub fn config_i() -> Self {
        Self::new(MontageName::ConfigI)
    }

    pub fn config_ii() -> Self {
        Self::new(MontageName::ConfigII)
    }

    pub fn config_iii() -> Self {
        Self::new(MontageName::ConfigIII)
    }

    pub fn all() -> [ElectrodeMontage; 3] {
        [Self::config_i(), Self::config_ii(), Self::config_iii()]
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

impl fmt::Display for ElectrodeMontage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.name.fmt(f)
    }
}

impl FromStr for ElectrodeMontage {
    type Err = Error;

    /// Accepts `I`/`II`/`III`, `CONFIG_I`.., or the channel count `4`/`8`/`16`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("CONFIG_").unwrap_or(&key);
        let name = match key {
            "I" | "4" => MontageName::ConfigI,
            "II" | "8" => MontageName::ConfigII,
            "III" | "16" => MontageName::ConfigIII,
            _ => return Err(Error::UnknownMontage(s.to_string())),
        };
        Ok(ElectrodeMontage::new(name))
    }
}

/// A fixed-length post-stimulus window, channel x time.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub data: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    pub stimulus_class: u8,
    pub is_target: bool,
    pub channel_labels: Vec<String>,
    pub run_id: u64,
    pub sequence_index: u32,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_times(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

/// Maps each wanted label to its row in `available`.
pub fn channel_indices(available: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            available
                .iter()
                .position(|a| a == w)
                .ok_or_else(|| Error::MissingChannel(w.clone()))
        })
        .collect()
}

/// Number of samples in a window of `window_ms` at `sample_rate_hz`.
pub fn window_samples(sample_rate_hz: f64, window_ms: f64) -> usize {
    (sample_rate_hz * window_ms / 1000.0).round() as usize
}

/// Epochs cut from a recording, with the events that did not fit.
#[derive(Debug, Clone)]
pub struct EpochExtraction {
    pub epochs: Vec<Epoch>,
    /// Indices into the recording's event list of rejected events.
    pub truncated: Vec<usize>,
}

impl EpochExtraction {
    /// `EventTruncated` with the rejected count, if any event was rejected.
    pub fn truncation_error(&self) -> Option<Error> {
        (!self.truncated.is_empty()).then_some(Error::EventTruncated {
            count: self.truncated.len(),
        })
    }
}

/// Cuts one `[onset, onset + window)` epoch per event. Events whose window
/// runs past the end of the recording are rejected and reported; the rest
/// are unaffected. Overlapping windows are extracted independently.
pub fn extract_epochs(rec: &Recording, window_ms: f64) -> Result<EpochExtraction> {
    if !(window_ms.is_finite() && window_ms > 0.0) {
        return Err(Error::InvalidRecording(format!("invalid window {window_ms} ms")));
    }
    let n = window_samples(rec.sample_rate_hz, window_ms);
    let total = rec.n_samples();
    let mut epochs = Vec::with_capacity(rec.events.len());
    let mut truncated = Vec::new();
    for (i, ev) in rec.events.iter().enumerate() {
        let end = ev.onset_sample + n;
        if end > total {
            truncated.push(i);
            continue;
        }
        epochs.push(Epoch {
            data: rec
                .samples
                .iter()
                .map(|row| row[ev.onset_sample..end].to_vec())
                .collect(),
            sample_rate_hz: rec.sample_rate_hz,
            stimulus_class: ev.stimulus_class,
            is_target: ev.is_target,
            channel_labels: rec.channel_labels.clone(),
            run_id: ev.run_id,
            sequence_index: ev.sequence_index,
        });
    }
    if !truncated.is_empty() {
        warn!(
            "rejected {} event(s) whose {window_ms} ms window exceeds the recording",
            truncated.len()
        );
    }
    Ok(EpochExtraction { epochs, truncated })
}

/// Restricts an epoch to the montage channels in montage order.
pub fn select_montage(epoch: &Epoch, montage: &ElectrodeMontage) -> Result<Epoch> {
    let idx = channel_indices(&epoch.channel_labels, &montage.channels)?;
    Ok(Epoch {
        data: idx.iter().map(|&i| epoch.data[i].clone()).collect(),
        channel_labels: montage.channels.clone(),
        ..epoch.clone()
    })
}

/// Subtracts the per-sample mean of the reference channels from every row.
pub fn rereference(rec: &Recording, reference_channels: &[String]) -> Result<Recording> {
    if reference_channels.is_empty() {
        return Err(Error::InvalidRecording("no reference channels given".into()));
    }
    let idx = channel_indices(&rec.channel_labels, reference_channels)?;
    let n = rec.n_samples();
    let scale = 1.0 / idx.len() as f64;
    let reference: Vec<f64> = (0..n)
        .map(|t| idx.iter().map(|&i| rec.samples[i][t]).sum::<f64>() * scale)
        .collect();
    let samples = rec
        .samples
        .iter()
        .map(|row| row.iter().zip(&reference).map(|(x, r)| x - r).collect())
        .collect();
    Ok(Recording {
        samples,
        reference_note: format!("average of {}", reference_channels.join("+")),
        ..rec.clone()
    })
}

/// Re-references to the mastoid average when a known mastoid pair is
/// present; otherwise returns the recording unchanged and logs a notice.
pub fn rereference_to_mastoids(rec: &Recording) -> Result<Recording> {
    for pair in MASTOID_PAIRS {
        if pair.iter().all(|m| rec.channel_labels.iter().any(|l| l == m)) {
            let refs: Vec<String> = pair.iter().map(|s| s.to_string()).collect();
            return rereference(rec, &refs);
        }
    }
    info!(
        "no mastoid pair found, keeping existing reference ({})",
        rec.reference_note
    );
    Ok(rec.clone())
}

/// A collection of epochs sharing rate and channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub sample_rate_hz: f64,
    pub channel_labels: Vec<String>,
    pub paradigm: Paradigm,
    pub stage: Stage,
    pub reference_note: String,
    pub epochs: Vec<Epoch>,
}

/// Whether an [`EpochSet`] holds raw epochs or preprocessed feature epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Features,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Features => "features",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Stage::Raw),
            "features" => Ok(Stage::Features),
            other => Err(Error::InvalidRecording(format!("unknown stage {other:?}"))),
        }
    }
}

impl EpochSet {
    /// Builds a raw set from extracted epochs of `rec`.
    pub fn from_recording(rec: &Recording, epochs: Vec<Epoch>) -> Self {
        EpochSet {
            sample_rate_hz: rec.sample_rate_hz,
            channel_labels: rec.channel_labels.clone(),
            paradigm: rec.paradigm,
            stage: Stage::Raw,
            reference_note: rec.reference_note.clone(),
            epochs,
        }
    }

    /// Checks that every epoch agrees with the set's rate and layout.
    pub fn validate(&self) -> Result<()> {
        let n_times = self.epochs.first().map_or(0, Epoch::n_times);
        for (i, e) in self.epochs.iter().enumerate() {
            if e.channel_labels != self.channel_labels
                || e.sample_rate_hz != self.sample_rate_hz
                || e.data.len() != self.channel_labels.len()
                || e.data.iter().any(|row| row.len() != n_times)
            {
                return Err(Error::CountMismatch(format!(
                    "epoch {i} does not match the set layout"
                )));
            }
            if e.stimulus_class >= self.paradigm.n_codes() {
                return Err(Error::InvalidRecording(format!(
                    "epoch {i}: stimulus class {} out of range",
                    e.stimulus_class
                )));
            }
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.epochs.first().map_or(0, Epoch::n_times)
    }
}

/// One preprocessed epoch inside a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEntry {
    pub stimulus_class: u8,
    pub trial_index: u32,
    pub features: FeatureVector,
}

/// All epochs of one six-class decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub id: u64,
    pub epochs: Vec<SequenceEntry>,
    pub target_class: u8,
    /// Number of complete trials: the smallest per-class epoch count.
    pub n_trials: usize,
}

impl SequenceRecord {
    pub fn new(id: u64, epochs: Vec<SequenceEntry>, target_class: u8) -> Result<Self> {
        if target_class as usize >= N_CLASSES {
            return Err(Error::InvalidRecording(format!(
                "sequence {id}: target class {target_class} out of range"
            )));
        }
        let mut counts = [0usize; N_CLASSES];
        for e in &epochs {
            let c = e.stimulus_class as usize;
            if c >= N_CLASSES {
                return Err(Error::InvalidRecording(format!(
                    "sequence {id}: stimulus class {c} out of range"
                )));
            }
            counts[c] += 1;
        }
        let n_trials = counts.iter().copied().min().unwrap_or(0);
        Ok(SequenceRecord {
            id,
            epochs,
            target_class,
            n_trials,
        })
    }

    /// True when every class has the same number of epochs.
    pub fn is_complete(&self) -> bool {
        self.epochs.len() == self.n_trials * N_CLASSES
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn ev(onset: usize, class: u8, target: bool) -> StimulusEvent {
        StimulusEvent {
            onset_sample: onset,
            stimulus_class: class,
            is_target: target,
            run_id: 0,
            sequence_index: 0,
        }
    }

    fn ramp_recording(fs: f64, n: usize, names: &[&str], events: Vec<StimulusEvent>) -> Recording {
        let samples = (0..names.len())
            .map(|c| (0..n).map(|t| (c * 10_000 + t) as f64).collect())
            .collect();
        Recording::new(samples, fs, labels(names), "left mastoid", events, Paradigm::SixClass)
            .unwrap()
    }

    #[test]
    fn six_events_give_six_epochs() {
        let events = (0..6).map(|c| ev(c as usize * 100, c, c == 2)).collect();
        let rec = ramp_recording(256.0, 2000, &["Fz", "Cz"], events);
        let out = extract_epochs(&rec, EPOCH_WINDOW_MS).unwrap();
        assert_eq!(out.epochs.len(), 6);
        assert!(out.truncated.is_empty());
        for (c, e) in out.epochs.iter().enumerate() {
            assert_eq!(e.n_times(), 256);
            assert_eq!(e.stimulus_class as usize, c);
            assert_eq!(e.data[1][0], (10_000 + c * 100) as f64);
        }
        assert!(out.epochs[2].is_target);
    }

    #[test]
    fn raw_epoch_at_2048_hz_has_2048_samples() {
        let rec = ramp_recording(2048.0, 4096, &["Pz"], vec![ev(10, 0, true)]);
        let out = extract_epochs(&rec, EPOCH_WINDOW_MS).unwrap();
        assert_eq!(out.epochs[0].n_times(), 2048);
    }

    #[test]
    fn event_near_end_is_rejected_alone() {
        // 100 ms before the end at 1 kHz.
        let events = vec![ev(0, 0, true), ev(1900, 1, false), ev(10, 2, false)];
        let rec = ramp_recording(1000.0, 2000, &["Fz"], events);
        let out = extract_epochs(&rec, EPOCH_WINDOW_MS).unwrap();
        assert_eq!(out.epochs.len(), 2);
        assert_eq!(out.truncated, vec![1]);
        assert!(matches!(
            out.truncation_error(),
            Some(Error::EventTruncated { count: 1 })
        ));
    }

    #[test]
    fn recording_rejects_bad_targets() {
        let samples = vec![vec![0.0; 10]];
        let two_targets = vec![ev(0, 0, true), ev(1, 1, true)];
        assert!(Recording::new(
            samples.clone(),
            10.0,
            labels(&["Fz"]),
            "",
            two_targets,
            Paradigm::SixClass
        )
        .is_err());
        let out_of_span = vec![ev(10, 0, true)];
        assert!(Recording::new(
            samples.clone(),
            10.0,
            labels(&["Fz"]),
            "",
            out_of_span,
            Paradigm::SixClass
        )
        .is_err());
        let rowcol = vec![ev(0, 2, true), ev(1, 9, true), ev(2, 3, false)];
        assert!(Recording::new(samples, 10.0, labels(&["Fz"]), "", rowcol, Paradigm::RowColumn).is_ok());
    }

    #[test]
    fn montages_are_nested() {
        let [i, ii, iii] = ElectrodeMontage::all();
        assert_eq!(i.channels, labels(&["Fz", "Cz", "Pz", "Oz"]));
        assert_eq!(ii.len(), 8);
        assert_eq!(iii.len(), 16);
        assert_eq!(&ii.channels[..4], &i.channels[..]);
        assert_eq!(&iii.channels[..8], &ii.channels[..]);
        assert_eq!(&iii.channels[8..], &labels(&CONFIG_III_EXTRA)[..]);
        assert_eq!("ii".parse::<ElectrodeMontage>().unwrap(), ii);
        assert_eq!("CONFIG_III".parse::<ElectrodeMontage>().unwrap(), iii);
        assert_eq!("4".parse::<ElectrodeMontage>().unwrap(), i);
        assert!("IV".parse::<ElectrodeMontage>().is_err());
    }

    fn epoch_with(names: &[&str]) -> Epoch {
        Epoch {
            data: (0..names.len()).map(|c| vec![c as f64; 5]).collect(),
            sample_rate_hz: 5.0,
            stimulus_class: 0,
            is_target: false,
            channel_labels: labels(names),
            run_id: 0,
            sequence_index: 0,
        }
    }

    #[test]
    fn select_montage_orders_channels() {
        let names = [
            "Fp1", "Oz", "P7", "Pz", "O1", "Cz", "C3", "Fz", "P3", "P4", "P8",
        ];
        let e = epoch_with(&names);
        let out = select_montage(&e, &ElectrodeMontage::config_i()).unwrap();
        assert_eq!(out.channel_labels, labels(&["Fz", "Cz", "Pz", "Oz"]));
        assert_eq!(out.data, vec![vec![7.0; 5], vec![5.0; 5], vec![3.0; 5], vec![1.0; 5]]);

        let same = select_montage(&out, &ElectrodeMontage::config_i()).unwrap();
        assert_eq!(same, out);

        let no_p7 = epoch_with(&["Fz", "Cz", "Pz", "Oz", "P3", "P4", "P8"]);
        match select_montage(&no_p7, &ElectrodeMontage::config_ii()) {
            Err(Error::MissingChannel(l)) => assert_eq!(l, "P7"),
            other => panic!("expected MissingChannel, got {other:?}"),
        }
    }

    fn rec_with(rows: Vec<Vec<f64>>, names: &[&str]) -> Recording {
        Recording::new(rows, 100.0, labels(names), "raw", vec![], Paradigm::SixClass).unwrap()
    }

    #[test]
    fn rereference_examples() {
        let data = vec![1.0, -3.0, 2.5, 7.0];
        let zero = rec_with(vec![data.clone(), vec![0.0; 4], vec![0.0; 4]], &["Cz", "M1", "M2"]);
        let out = rereference_to_mastoids(&zero).unwrap();
        assert_eq!(out.samples()[0], data);
        assert_eq!(out.reference_note(), "average of M1+M2");

        let r = vec![0.5, 0.25, -1.0, 2.0];
        let single = rec_with(vec![data.clone(), r.clone()], &["Cz", "M1"]);
        let out = rereference(&single, &labels(&["M1"])).unwrap();
        let expect: Vec<f64> = data.iter().zip(&r).map(|(c, r)| c - r).collect();
        assert_eq!(out.samples()[0], expect);

        let sym = rec_with(vec![data.clone(), vec![2.0; 4], vec![-2.0; 4]], &["Cz", "M1", "M2"]);
        let out = rereference_to_mastoids(&sym).unwrap();
        assert_eq!(out.samples()[0], data);
    }

    #[test]
    fn rereference_without_mastoids_is_a_noop() {
        let rec = rec_with(vec![vec![1.0, 2.0]], &["Cz"]);
        assert_eq!(rereference_to_mastoids(&rec).unwrap(), rec);
        assert!(matches!(
            rereference(&rec, &labels(&["M1"])),
            Err(Error::MissingChannel(_))
        ));
    }

    #[test]
    fn sequence_record_counts_trials() {
        let fv = FeatureVector::zeros(1, vec!["Pz".into()], false, 0);
        let entries: Vec<SequenceEntry> = (0..N_CLASSES as u8)
            .flat_map(|c| {
                let fv = fv.clone();
                (0..3).map(move |t| SequenceEntry {
                    stimulus_class: c,
                    trial_index: t,
                    features: fv.clone(),
                })
            })
            .collect();
        let seq = SequenceRecord::new(4, entries.clone(), 2).unwrap();
        assert_eq!(seq.n_trials, 3);
        assert!(seq.is_complete());
        let short = SequenceRecord::new(4, entries[1..].to_vec(), 2).unwrap();
        assert_eq!(short.n_trials, 2);
        assert!(!short.is_complete());
    }
}
