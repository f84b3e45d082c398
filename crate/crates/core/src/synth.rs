//! Synthetic P300 sessions and brute-force reference decisions.
//!
//! Every epoch is white Gaussian noise; target epochs add a half-sine
//! deflection 300 ms wide centred on the latency, scaled per electrode.
//! Each sequence draws from its own ChaCha stream (`seed`, sequence
//! index), so sequences can be generated in any order or in parallel.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::classify::ClassifierFamily;
use crate::dataset::{
    window_samples, ElectrodeMontage, Epoch, EpochSet, Paradigm, SequenceEntry, SequenceRecord,
    Stage, EPOCH_WINDOW_MS, N_CLASSES,
};
use crate::dsp::Preprocessor;
use crate::error::{Error, Result};
use crate::eval::cross_validated_accuracy;

const GENERATOR_VERSION: &str = "1";
const TEMPLATE_WIDTH_MS: f64 = 300.0;
const DEFAULT_GAIN: f64 = 0.5;

/// Relative P300 amplitude per electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGainMap {
    pub gains: BTreeMap<String, f64>,
}

impl Default for ChannelGainMap {
    fn default() -> Self {
        let gains = [("Fz", 0.4), ("Cz", 0.7), ("Pz", 1.0), ("Oz", 0.3)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ChannelGainMap { gains }
    }
}

impl ChannelGainMap {
    /// Gain of `label`; electrodes not listed get 0.5.
    pub fn gain(&self, label: &str) -> f64 {
        self.gains.get(label).copied().unwrap_or(DEFAULT_GAIN)
    }
}

/// Hash identifying the generator's model and the feature pipeline, so
/// stored calibrations can be checked against the code that produced them.
pub fn generator_hash() -> String {
    let mut desc = format!(
        "version={GENERATOR_VERSION};template=half_sine;width_ms={TEMPLATE_WIDTH_MS};\
         noise=white_gaussian;rng=chacha8_stream_per_sequence;\
         pipeline=butter3_1_12_sos,resample32,winsor_nearest_rank_10_90,unit_range;\
         default_gain={DEFAULT_GAIN};gains="
    );
    for (k, v) in &ChannelGainMap::default().gains {
        let _ = write!(desc, "{k}:{v},");
    }
    hex::encode(Sha256::digest(desc.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_sequences: usize,
    pub n_trials: usize,
    pub montage: ElectrodeMontage,
    pub sample_rate_hz: f64,
    pub p300_amplitude_uv: f64,
    pub noise_std_uv: f64,
    pub latency_ms: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_sequences: usize, n_trials: usize, montage: ElectrodeMontage, seed: u64) -> Self {
        SynthSpec {
            n_sequences,
            n_trials,
            montage,
            sample_rate_hz: 128.0,
            p300_amplitude_uv: 5.0,
            noise_std_uv: 10.0,
            latency_ms: 300.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSynthSpec(msg));
        if self.n_sequences == 0 || self.n_trials == 0 {
            return bad("need at least one sequence and one trial".into());
        }
        if self.montage.is_empty() {
            return bad("montage has no channels".into());
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate {}", self.sample_rate_hz));
        }
        if !(self.p300_amplitude_uv.is_finite() && self.p300_amplitude_uv >= 0.0) {
            return bad(format!("amplitude {}", self.p300_amplitude_uv));
        }
        if !(self.noise_std_uv.is_finite() && self.noise_std_uv >= 0.0) {
            return bad(format!("noise std {}", self.noise_std_uv));
        }
        if !(0.0..EPOCH_WINDOW_MS).contains(&self.latency_ms) {
            return bad(format!("latency {} ms outside the epoch", self.latency_ms));
        }
        Ok(())
    }

    /// Samples per epoch.
    pub fn n_times(&self) -> usize {
        window_samples(self.sample_rate_hz, EPOCH_WINDOW_MS)
    }

    /// Unit-gain target deflection sampled over one epoch.
    pub fn template(&self) -> Vec<f64> {
        let start = self.latency_ms - TEMPLATE_WIDTH_MS / 2.0;
        (0..self.n_times())
            .map(|n| {
                let t = n as f64 * 1000.0 / self.sample_rate_hz - start;
                if (0.0..TEMPLATE_WIDTH_MS).contains(&t) {
                    self.p300_amplitude_uv * (PI * t / TEMPLATE_WIDTH_MS).sin()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Raw epochs of one sequence and its target class. Each trial presents
/// the six classes in a random order.
pub fn sequence_epochs(spec: &SynthSpec, index: u64, template: &[f64]) -> (u8, Vec<Epoch>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let target: u8 = rng.random_range(0..N_CLASSES as u8);
    let gains = ChannelGainMap::default();
    let gain: Vec<f64> = spec.montage.channels.iter().map(|c| gains.gain(c)).collect();
    let mut epochs = Vec::with_capacity(spec.n_trials * N_CLASSES);
    let mut order: Vec<u8> = (0..N_CLASSES as u8).collect();
    for trial in 0..spec.n_trials {
        order.shuffle(&mut rng);
        for &class in &order {
            let is_target = class == target;
            let data = gain
                .iter()
                .map(|&g| {
                    template
                        .iter()
                        .map(|&s| {
                            let noise: f64 = rng.sample(StandardNormal);
                            let signal = if is_target { g * s } else { 0.0 };
                            signal + spec.noise_std_uv * noise
                        })
                        .collect()
                })
                .collect();
            epochs.push(Epoch {
                data,
                sample_rate_hz: spec.sample_rate_hz,
                stimulus_class: class,
                is_target,
                channel_labels: spec.montage.channels.clone(),
                run_id: index,
                sequence_index: trial as u32,
            });
        }
    }
    (target, epochs)
}

/// A generated session: raw epochs plus the true target of each run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub epochs: EpochSet,
    pub targets: Vec<u8>,
}

pub fn generate_session(spec: &SynthSpec) -> Result<SynthSession> {
    spec.validate()?;
    let template = spec.template();
    let parts: Vec<(u8, Vec<Epoch>)> = (0..spec.n_sequences as u64)
        .into_par_iter()
        .map(|i| sequence_epochs(spec, i, &template))
        .collect();
    let mut targets = Vec::with_capacity(parts.len());
    let mut epochs = Vec::with_capacity(spec.n_sequences * spec.n_trials * N_CLASSES);
    for (t, e) in parts {
        targets.push(t);
        epochs.extend(e);
    }
    Ok(SynthSession {
        epochs: EpochSet {
            sample_rate_hz: spec.sample_rate_hz,
            channel_labels: spec.montage.channels.clone(),
            paradigm: Paradigm::SixClass,
            stage: Stage::Raw,
            reference_note: "synthetic, reference-free".into(),
            epochs,
        },
        targets,
    })
}

/// Generates and preprocesses sequence by sequence, never holding the raw
/// session in memory.
pub fn generate_feature_sequences(spec: &SynthSpec, pre: &Preprocessor) -> Result<Vec<SequenceRecord>> {
    spec.validate()?;
    let template = spec.template();
    (0..spec.n_sequences as u64)
        .into_par_iter()
        .map(|i| {
            let (target, epochs) = sequence_epochs(spec, i, &template);
            let entries = epochs
                .iter()
                .map(|e| {
                    Ok(SequenceEntry {
                        stimulus_class: e.stimulus_class,
                        trial_index: e.sequence_index,
                        features: pre.process(e)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SequenceRecord::new(i, entries, target)
        })
        .collect()
}

/// Reference sequence decision written with plain loops: `scores[c][t]` is
/// the score of class `c` at trial `t`. Returns the first class with the
/// largest mean over trials `0..n_trials`.
pub fn brute_force_sequence_decision(scores: &[Vec<f64>], n_trials: usize) -> Result<u8> {
    if n_trials == 0 {
        return Err(Error::EmptyRequest("n_trials must be at least 1".into()));
    }
    if scores.len() != N_CLASSES {
        return Err(Error::DimensionMismatch {
            expected: N_CLASSES,
            got: scores.len(),
        });
    }
    let mut means = [0.0f64; N_CLASSES];
    let mut c = 0;
    while c < N_CLASSES {
        if scores[c].len() < n_trials {
            return Err(Error::IncompleteSequence {
                sequence: 0,
                class: c as u8,
                available: scores[c].len(),
                requested: n_trials,
            });
        }
        let mut total = 0.0;
        let mut t = 0;
        while t < n_trials {
            total += scores[c][t];
            t += 1;
        }
        means[c] = total / n_trials as f64;
        c += 1;
    }
    let mut winner = 0;
    for c in 1..N_CLASSES {
        if means[c] > means[winner] {
            winner = c;
        }
    }
    Ok(winner as u8)
}

/// Session and evaluation settings for [`calibrate_snr`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub n_sequences: usize,
    pub n_trials: usize,
    pub k: usize,
    pub sample_rate_hz: f64,
    pub noise_std_uv: f64,
    pub seed: u64,
    /// Independent sessions (seeds `seed..seed + replicates`) averaged at
    /// each amplitude.
    pub replicates: usize,
    /// First upper bracket for the amplitude.
    pub initial_amplitude_uv: f64,
    pub max_amplitude_uv: f64,
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            n_sequences: 200,
            n_trials: 5,
            k: 10,
            sample_rate_hz: 128.0,
            noise_std_uv: 10.0,
            seed: 2024,
            replicates: 5,
            initial_amplitude_uv: 10.0,
            max_amplitude_uv: 200.0,
            tolerance: 0.03,
            max_steps: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub family: ClassifierFamily,
    pub montage: ElectrodeMontage,
    pub target_accuracy: f64,
    pub amplitude_uv: f64,
    pub achieved_accuracy: f64,
    pub options: CalibrationOptions,
    pub generator_hash: String,
    /// `(amplitude, accuracy)` for every evaluation, in order.
    pub history: Vec<(f64, f64)>,
}

impl Calibration {
    /// Session spec at the calibrated amplitude.
    pub fn spec(&self, n_sequences: usize, n_trials: usize, montage: ElectrodeMontage, seed: u64) -> SynthSpec {
        SynthSpec {
            sample_rate_hz: self.options.sample_rate_hz,
            noise_std_uv: self.options.noise_std_uv,
            p300_amplitude_uv: self.amplitude_uv,
            ..SynthSpec::new(n_sequences, n_trials, montage, seed)
        }
    }

    /// Flat `key=value` fixture text.
    pub fn to_fixture(&self) -> String {
        let o = &self.options;
        let mut s = String::new();
        let _ = writeln!(s, "# synthetic amplitude calibration");
        for (k, v) in [
            ("generator_hash", self.generator_hash.clone()),
            ("family", self.family.to_string()),
            ("montage", self.montage.to_string()),
            ("target_accuracy", self.target_accuracy.to_string()),
            ("amplitude_uv", self.amplitude_uv.to_string()),
            ("achieved_accuracy", self.achieved_accuracy.to_string()),
            ("n_sequences", o.n_sequences.to_string()),
            ("n_trials", o.n_trials.to_string()),
            ("folds", o.k.to_string()),
            ("sample_rate_hz", o.sample_rate_hz.to_string()),
            ("noise_std_uv", o.noise_std_uv.to_string()),
            ("seed", o.seed.to_string()),
            ("replicates", o.replicates.to_string()),
            ("tolerance", o.tolerance.to_string()),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn from_fixture(text: &str) -> Result<Calibration> {
        let kv = crate::io::parse_key_values(text)?;
        let get = |k: &str| {
            kv.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("calibration fixture lacks {k:?}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for {k:?}")))
        }
        let options = CalibrationOptions {
            n_sequences: num("n_sequences", get("n_sequences")?)?,
            n_trials: num("n_trials", get("n_trials")?)?,
            k: num("folds", get("folds")?)?,
            sample_rate_hz: num("sample_rate_hz", get("sample_rate_hz")?)?,
            noise_std_uv: num("noise_std_uv", get("noise_std_uv")?)?,
            seed: num("seed", get("seed")?)?,
            replicates: num("replicates", get("replicates")?)?,
            tolerance: num("tolerance", get("tolerance")?)?,
            ..CalibrationOptions::default()
        };
        Ok(Calibration {
            family: get("family")?.parse()?,
            montage: get("montage")?.parse()?,
            target_accuracy: num("target_accuracy", get("target_accuracy")?)?,
            amplitude_uv: num("amplitude_uv", get("amplitude_uv")?)?,
            achieved_accuracy: num("achieved_accuracy", get("achieved_accuracy")?)?,
            options,
            generator_hash: get("generator_hash")?,
            history: Vec::new(),
        })
    }

    /// True when the fixture was produced by this generator.
    pub fn is_current(&self) -> bool {
        self.generator_hash == generator_hash()
    }
}

/// Mean cross-validated accuracy of `family` over `opts.replicates` fresh
/// sessions with the given amplitude, at `opts.n_trials` trials.
pub fn accuracy_at_amplitude(
    amplitude_uv: f64,
    family: ClassifierFamily,
    montage: &ElectrodeMontage,
    opts: &CalibrationOptions,
) -> Result<f64> {
    if opts.replicates == 0 {
        return Err(Error::InvalidSynthSpec("need at least one replicate session".into()));
    }
    let pre = Preprocessor::standard(montage.clone(), opts.sample_rate_hz)?;
    let mut total = 0.0;
    for r in 0..opts.replicates as u64 {
        let seed = opts.seed.wrapping_add(r);
        let spec = SynthSpec {
            sample_rate_hz: opts.sample_rate_hz,
            noise_std_uv: opts.noise_std_uv,
            p300_amplitude_uv: amplitude_uv,
            ..SynthSpec::new(opts.n_sequences, opts.n_trials, montage.clone(), seed)
        };
        let seqs = generate_feature_sequences(&spec, &pre)?;
        total += cross_validated_accuracy(&seqs, family, montage, opts.n_trials, opts.k, seed, None)?.accuracy;
    }
    Ok(total / opts.replicates as f64)
}

/// Bisects the P300 amplitude until the cross-validated accuracy is within
/// `opts.tolerance` of `target_accuracy`. The upper bracket is widened once
/// (up to `max_amplitude_uv`) if it is too low.
pub fn calibrate_snr(
    target_accuracy: f64,
    family: ClassifierFamily,
    montage: &ElectrodeMontage,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let chance = 1.0 / N_CLASSES as f64;
    if !(target_accuracy > chance && target_accuracy < 1.0) {
        return Err(Error::InvalidCalibrationTarget(target_accuracy));
    }
    let mut history = Vec::new();
    let mut eval = |amp: f64| -> Result<f64> {
        let acc = accuracy_at_amplitude(amp, family, montage, opts)?;
        log::debug!("amplitude {amp:.4} uV -> accuracy {acc:.4}");
        history.push((amp, acc));
        Ok(acc)
    };
    let done = |amp: f64, acc: f64, history: Vec<(f64, f64)>| Calibration {
        family,
        montage: montage.clone(),
        target_accuracy,
        amplitude_uv: amp,
        achieved_accuracy: acc,
        options: opts.clone(),
        generator_hash: generator_hash(),
        history,
    };

    let mut hi = opts.initial_amplitude_uv.min(opts.max_amplitude_uv);
    let mut acc_hi = eval(hi)?;
    if acc_hi < target_accuracy - opts.tolerance {
        hi = (hi * 4.0).min(opts.max_amplitude_uv);
        acc_hi = eval(hi)?;
        if acc_hi < target_accuracy - opts.tolerance {
            return Err(Error::NonMonotoneEstimate(format!(
                "accuracy {acc_hi:.3} at the amplitude cap {hi} uV stays below {target_accuracy}"
            )));
        }
    }
    if (acc_hi - target_accuracy).abs() <= opts.tolerance {
        return Ok(done(hi, acc_hi, history));
    }
    let mut lo = 0.0;
    for _ in 0..opts.max_steps {
        let mid = 0.5 * (lo + hi);
        let acc = eval(mid)?;
        if (acc - target_accuracy).abs() <= opts.tolerance {
            return Ok(done(mid, acc, history));
        }
        if acc < target_accuracy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonMonotoneEstimate(format!(
        "no amplitude in [{lo}, {hi}] uV reached {target_accuracy} +/- {}",
        opts.tolerance
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(amplitude: f64, noise: f64) -> SynthSpec {
        SynthSpec {
            p300_amplitude_uv: amplitude,
            noise_std_uv: noise,
            ..SynthSpec::new(4, 3, ElectrodeMontage::config_i(), 11)
        }
    }

    #[test]
    fn gains_follow_scalp_gradient() {
        let g = ChannelGainMap::default();
        assert_eq!(g.gain("Pz"), 1.0);
        assert!(g.gain("Fz") < g.gain("Cz") && g.gain("Cz") < g.gain("Pz"));
        assert_eq!(g.gain("Oz"), 0.3);
        assert_eq!(g.gain("P7"), 0.5);
        assert!(g.gains.values().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn template_is_centred_half_sine() {
        let spec = SynthSpec {
            sample_rate_hz: 1000.0,
            ..small_spec(2.0, 0.0)
        };
        let t = spec.template();
        assert_eq!(t.len(), 1000);
        assert_eq!(t[149], 0.0);
        assert_eq!(t[150], 0.0);
        assert!((t[300] - 2.0).abs() < 1e-12);
        assert!(t[151..450].iter().all(|&v| v > 0.0));
        assert_eq!(t[450], 0.0);
    }

    #[test]
    fn noiseless_targets_differ_by_template() {
        let spec = small_spec(3.0, 0.0);
        let s = generate_session(&spec).unwrap();
        let template = spec.template();
        let gains = ChannelGainMap::default();
        for e in &s.epochs.epochs {
            assert_eq!(e.is_target, e.stimulus_class == s.targets[e.run_id as usize]);
            for (row, label) in e.data.iter().zip(&e.channel_labels) {
                let g = if e.is_target { gains.gain(label) } else { 0.0 };
                for (v, t) in row.iter().zip(&template) {
                    assert_eq!(*v, g * t);
                }
            }
        }
        assert_eq!(s.epochs.epochs.len(), 4 * 3 * 6);
    }

    #[test]
    fn deterministic_and_order_free() {
        let spec = small_spec(1.0, 2.0);
        let a = generate_session(&spec).unwrap();
        assert_eq!(a, generate_session(&spec).unwrap());
        let template = spec.template();
        let (t2, e2) = sequence_epochs(&spec, 2, &template);
        assert_eq!(t2, a.targets[2]);
        assert_eq!(e2[..], a.epochs.epochs[2 * 18..3 * 18]);
        let other = SynthSpec { seed: 12, ..spec };
        assert_ne!(generate_session(&other).unwrap().epochs, a.epochs);
    }

    #[test]
    fn brute_force_examples() {
        let table = vec![vec![0.5, 0.5]; 6];
        assert_eq!(brute_force_sequence_decision(&table, 2).unwrap(), 0);
        let mut table = vec![vec![0.0, 9.0]; 6];
        table[4][0] = 1.0;
        assert_eq!(brute_force_sequence_decision(&table, 1).unwrap(), 4);
        assert!(brute_force_sequence_decision(&table, 3).is_err());
        assert!(brute_force_sequence_decision(&table, 0).is_err());
    }

    #[test]
    fn calibration_rejects_degenerate_targets() {
        let m = ElectrodeMontage::config_ii();
        let o = CalibrationOptions::default();
        for t in [1.0 / 6.0, 0.1, 1.0] {
            assert!(matches!(
                calibrate_snr(t, ClassifierFamily::BayesLda, &m, &o),
                Err(Error::InvalidCalibrationTarget(_))
            ));
        }
    }

    #[test]
    fn fixture_round_trip() {
        let c = Calibration {
            family: ClassifierFamily::BayesLda,
            montage: ElectrodeMontage::config_ii(),
            target_accuracy: 0.8,
            amplitude_uv: 3.25,
            achieved_accuracy: 0.79,
            options: CalibrationOptions::default(),
            generator_hash: generator_hash(),
            history: vec![],
        };
        let back = Calibration::from_fixture(&c.to_fixture()).unwrap();
        assert_eq!(back, c);
        assert!(back.is_current());
    }
}
