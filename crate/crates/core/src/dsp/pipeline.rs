use rayon::prelude::*;

use super::butterworth::{design_butterworth_bandpass_sos, BandpassSpec, SosFilter};
use crate::dataset::{channel_indices, ElectrodeMontage, Epoch, EpochSet, Stage};
use crate::error::{Error, Result};

/// Rate of the feature time axis.
pub const FEATURE_RATE_HZ: f64 = 32.0;

/// Time samples per electrode in a feature vector (1 s at 32 Hz).
pub const FEATURE_TIME_SAMPLES: usize = 32;

/// Clipping percentiles for [`winsorize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinsorizeSpec {
    pub lower_pct: f64,
    pub upper_pct: f64,
}

impl Default for WinsorizeSpec {
    fn default() -> Self {
        WinsorizeSpec {
            lower_pct: 10.0,
            upper_pct: 90.0,
        }
    }
}

impl WinsorizeSpec {
    pub fn new(lower_pct: f64, upper_pct: f64) -> Result<Self> {
        let spec = WinsorizeSpec {
            lower_pct,
            upper_pct,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lower_pct && self.lower_pct < self.upper_pct && self.upper_pct <= 100.0) {
            return Err(Error::InvalidPercentiles(format!(
                "need 0 <= {} < {} <= 100",
                self.lower_pct, self.upper_pct
            )));
        }
        Ok(())
    }
}

/// Classifier input: `n_time` samples for each electrode, electrode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub n_time: usize,
    pub electrodes: Vec<String>,
    /// True for P300 (target) epochs.
    pub label: bool,
    pub stimulus_class: u8,
}

impl FeatureVector {
    pub fn zeros(n_time: usize, electrodes: Vec<String>, label: bool, stimulus_class: u8) -> Self {
        FeatureVector {
            values: vec![0.0; n_time * electrodes.len()],
            n_time,
            electrodes,
            label,
            stimulus_class,
        }
    }

    pub fn n_electrodes(&self) -> usize {
        self.electrodes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples of one electrode.
    pub fn electrode(&self, index: usize) -> &[f64] {
        &self.values[index * self.n_time..(index + 1) * self.n_time]
    }

    /// Flattens an already-preprocessed epoch.
    pub fn from_epoch(epoch: &Epoch) -> Self {
        FeatureVector {
            values: epoch.data.concat(),
            n_time: epoch.n_times(),
            electrodes: epoch.channel_labels.clone(),
            label: epoch.is_target,
            stimulus_class: epoch.stimulus_class,
        }
    }

    /// Keeps only the montage electrodes, in montage order. Because every
    /// stage of the pipeline is per channel, this equals preprocessing with
    /// the smaller montage directly.
    pub fn restrict(&self, montage: &ElectrodeMontage) -> Result<FeatureVector> {
        if self.electrodes == montage.channels {
            return Ok(self.clone());
        }
        let idx = channel_indices(&self.electrodes, &montage.channels)?;
        let mut values = Vec::with_capacity(idx.len() * self.n_time);
        for i in idx {
            values.extend_from_slice(self.electrode(i));
        }
        Ok(FeatureVector {
            values,
            electrodes: montage.channels.clone(),
            ..self.clone()
        })
    }
}

/// Reduces the sample rate. Integer ratios keep every k-th sample from
/// index 0; other ratios interpolate linearly at `n / to_hz`. The output has
/// `floor(len * to_hz / from_hz)` samples.
pub fn resample_to(x: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    if to_hz > from_hz {
        return Err(Error::UpsampleUnsupported { from_hz, to_hz });
    }
    if !(to_hz > 0.0) {
        return Err(Error::InvalidBand(format!("target rate {to_hz} Hz")));
    }
    let ratio = from_hz / to_hz;
    let n_out = (x.len() as f64 * to_hz / from_hz + 1e-9).floor() as usize;
    let k = ratio.round();
    if (ratio - k).abs() < 1e-9 {
        let k = k as usize;
        return Ok(x.iter().step_by(k).take(n_out).copied().collect());
    }
    Ok((0..n_out)
        .map(|n| {
            let pos = n as f64 * ratio;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            match x.get(i + 1) {
                Some(&next) if frac > 0.0 => x[i] + frac * (next - x[i]),
                _ => x[i],
            }
        })
        .collect())
}

/// The order statistic nearest to rank `pct / 100 * (n - 1)` of a sorted
/// slice. Clip bounds taken this way are themselves data values, which
/// makes [`winsorize`] idempotent.
pub fn order_statistic_percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = (pct / 100.0 * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

/// Clips every value into the `[lower_pct, upper_pct]` percentile range of
/// the input.
pub fn winsorize(x: &[f64], spec: &WinsorizeSpec) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    spec.validate()?;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = order_statistic_percentile(&sorted, spec.lower_pct);
    let hi = order_statistic_percentile(&sorted, spec.upper_pct);
    Ok(x.iter().map(|&v| v.clamp(lo, hi)).collect())
}

/// Affine map of `min(x)` to -1 and `max(x)` to +1; a constant input maps
/// to all zeros.
pub fn normalize_unit_range(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok(x.iter().map(|&v| (2.0 * (v - min) / range - 1.0).clamp(-1.0, 1.0)).collect())
}

/// Preprocessing with the bandpass designed once and reused across epochs.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    band: BandpassSpec,
    filter: SosFilter,
    winsor: WinsorizeSpec,
    montage: ElectrodeMontage,
}

impl Preprocessor {
    pub fn new(montage: ElectrodeMontage, band: BandpassSpec, winsor: WinsorizeSpec) -> Result<Self> {
        winsor.validate()?;
        if band.sample_rate_hz < FEATURE_RATE_HZ {
            return Err(Error::UpsampleUnsupported {
                from_hz: band.sample_rate_hz,
                to_hz: FEATURE_RATE_HZ,
            });
        }
        let filter = design_butterworth_bandpass_sos(&band)?;
        Ok(Preprocessor {
            band,
            filter,
            winsor,
            montage,
        })
    }

    /// Standard settings (3rd-order 1-12 Hz, 10/90 % winsorizing).
    pub fn standard(montage: ElectrodeMontage, sample_rate_hz: f64) -> Result<Self> {
        Self::new(
            montage,
            BandpassSpec::standard(sample_rate_hz),
            WinsorizeSpec::default(),
        )
    }

    pub fn montage(&self) -> &ElectrodeMontage {
        &self.montage
    }

    pub fn band(&self) -> &BandpassSpec {
        &self.band
    }

    pub fn filter(&self) -> &SosFilter {
        &self.filter
    }

    /// One channel: filter, resample, winsorize, normalize, truncate to 32.
    pub fn process_channel(&self, x: &[f64]) -> Result<Vec<f64>> {
        let filtered = self.filter.filter(x);
        let mut resampled = resample_to(&filtered, self.band.sample_rate_hz, FEATURE_RATE_HZ)?;
        if resampled.len() < FEATURE_TIME_SAMPLES {
            return Err(Error::ShortEpoch {
                got: resampled.len(),
                need: FEATURE_TIME_SAMPLES,
            });
        }
        resampled.truncate(FEATURE_TIME_SAMPLES);
        let clipped = winsorize(&resampled, &self.winsor)?;
        normalize_unit_range(&clipped)
    }

    pub fn process(&self, epoch: &Epoch) -> Result<FeatureVector> {
        if epoch.sample_rate_hz != self.band.sample_rate_hz {
            return Err(Error::InvalidBand(format!(
                "filter designed for {} Hz, epoch sampled at {} Hz",
                self.band.sample_rate_hz, epoch.sample_rate_hz
            )));
        }
        let idx = channel_indices(&epoch.channel_labels, &self.montage.channels)?;
        let mut values = Vec::with_capacity(idx.len() * FEATURE_TIME_SAMPLES);
        for i in idx {
            let row = &epoch.data[i];
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRecording(format!(
                    "non-finite sample in channel {}",
                    epoch.channel_labels[i]
                )));
            }
            values.extend(self.process_channel(row)?);
        }
        Ok(FeatureVector {
            values,
            n_time: FEATURE_TIME_SAMPLES,
            electrodes: self.montage.channels.clone(),
            label: epoch.is_target,
            stimulus_class: epoch.stimulus_class,
        })
    }
}

/// Runs the full per-epoch pipeline and assembles the feature vector.
pub fn preprocess_epoch(
    epoch: &Epoch,
    montage: &ElectrodeMontage,
    band: &BandpassSpec,
    winsor: &WinsorizeSpec,
) -> Result<FeatureVector> {
    Preprocessor::new(montage.clone(), *band, *winsor)?.process(epoch)
}

/// Preprocesses every epoch of a raw set into a feature-stage set at 32 Hz.
pub fn preprocess_set(set: &EpochSet, pre: &Preprocessor) -> Result<EpochSet> {
    if set.stage != Stage::Raw {
        return Err(Error::InvalidRecording("epoch set is already preprocessed".into()));
    }
    let epochs = set
        .epochs
        .par_iter()
        .map(|e| {
            let fv = pre.process(e)?;
            Ok(Epoch {
                data: fv.values.chunks(fv.n_time).map(<[f64]>::to_vec).collect(),
                sample_rate_hz: FEATURE_RATE_HZ,
                channel_labels: fv.electrodes,
                ..e.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EpochSet {
        sample_rate_hz: FEATURE_RATE_HZ,
        channel_labels: pre.montage.channels.clone(),
        paradigm: set.paradigm,
        stage: Stage::Features,
        reference_note: set.reference_note.clone(),
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimate_2048_to_32() {
        let x: Vec<f64> = (0..2048).map(f64::from).collect();
        let y = resample_to(&x, 2048.0, 32.0).unwrap();
        assert_eq!(y.len(), 32);
        assert_eq!(y[1], 64.0);
        assert_eq!(y[31], 31.0 * 64.0);
    }

    #[test]
    fn resample_identity_and_constants() {
        let x = vec![3.0, -1.0, 2.5, 8.0];
        assert_eq!(resample_to(&x, 100.0, 100.0).unwrap(), x);
        for (from, to, n) in [(240.0, 32.0, 240usize), (250.0, 32.0, 250), (100.0, 7.0, 33)] {
            let y = resample_to(&vec![1.5; n], from, to).unwrap();
            assert_eq!(y.len(), (n as f64 * to / from).floor() as usize);
            assert!(y.iter().all(|&v| v == 1.5));
        }
        assert!(matches!(
            resample_to(&x, 32.0, 64.0),
            Err(Error::UpsampleUnsupported { .. })
        ));
    }

    #[test]
    fn resample_interpolates_linear_ramps() {
        let x: Vec<f64> = (0..240).map(|i| 0.5 * i as f64).collect();
        let y = resample_to(&x, 240.0, 32.0).unwrap();
        assert_eq!(y.len(), 32);
        for (n, v) in y.iter().enumerate() {
            assert!((v - 0.5 * n as f64 * 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn winsorize_examples() {
        let x: Vec<f64> = (0..=10).map(f64::from).collect();
        let y = winsorize(&x, &WinsorizeSpec::default()).unwrap();
        let mut expect = x.clone();
        expect[0] = 1.0;
        expect[10] = 9.0;
        assert_eq!(y, expect);
        assert_eq!(winsorize(&[4.0; 7], &WinsorizeSpec::default()).unwrap(), vec![4.0; 7]);
        assert!(matches!(
            winsorize(&[], &WinsorizeSpec::default()),
            Err(Error::EmptyInput)
        ));
        assert!(WinsorizeSpec::new(90.0, 10.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_unit_range(&[0.0, 5.0, 10.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(normalize_unit_range(&[7.0; 3]).unwrap(), vec![0.0; 3]);
        let y = normalize_unit_range(&[3.0, -2.0, 0.1, 9.5]).unwrap();
        assert_eq!(y.iter().cloned().fold(f64::INFINITY, f64::min), -1.0);
        assert_eq!(y.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        assert!(normalize_unit_range(&[]).is_err());
    }

    fn epoch(fs: f64, channels: &[String], fill: impl Fn(usize, usize) -> f64) -> Epoch {
        let n = (fs).round() as usize;
        Epoch {
            data: (0..channels.len()).map(|c| (0..n).map(|t| fill(c, t)).collect()).collect(),
            sample_rate_hz: fs,
            stimulus_class: 3,
            is_target: true,
            channel_labels: channels.to_vec(),
            run_id: 1,
            sequence_index: 2,
        }
    }

    #[test]
    fn feature_lengths() {
        let iii = ElectrodeMontage::config_iii();
        let e = epoch(256.0, &iii.channels, |c, t| ((c * 7 + t * 3) % 13) as f64);
        for m in ElectrodeMontage::all() {
            let fv = preprocess_epoch(&e, &m, &BandpassSpec::standard(256.0), &WinsorizeSpec::default())
                .unwrap();
            assert_eq!(fv.len(), 32 * m.len());
            assert_eq!(fv.n_electrodes(), m.len());
            assert!(fv.label);
            assert_eq!(fv.stimulus_class, 3);
            assert!(fv.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn zero_epoch_gives_zero_features() {
        let iii = ElectrodeMontage::config_iii();
        let e = epoch(2048.0, &iii.channels, |_, _| 0.0);
        let fv = preprocess_epoch(
            &e,
            &ElectrodeMontage::config_ii(),
            &BandpassSpec::standard(2048.0),
            &WinsorizeSpec::default(),
        )
        .unwrap();
        assert_eq!(fv.len(), 256);
        assert!(fv.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_and_mismatched_epochs_fail() {
        let i = ElectrodeMontage::config_i();
        let mut e = epoch(256.0, &i.channels, |_, t| t as f64);
        for row in &mut e.data {
            row.truncate(200);
        }
        let pre = Preprocessor::standard(i.clone(), 256.0).unwrap();
        assert!(matches!(pre.process(&e), Err(Error::ShortEpoch { got: 25, need: 32 })));
        let e = epoch(128.0, &i.channels, |_, t| t as f64);
        assert!(matches!(pre.process(&e), Err(Error::InvalidBand(_))));
        let mut e = epoch(256.0, &i.channels, |_, t| t as f64);
        e.data[2][5] = f64::NAN;
        assert!(pre.process(&e).is_err());
    }

    #[test]
    fn restrict_matches_direct_preprocessing() {
        let iii = ElectrodeMontage::config_iii();
        let e = epoch(128.0, &iii.channels, |c, t| ((c * 31 + t * 17) % 23) as f64 - 11.0);
        let full = Preprocessor::standard(iii, 128.0).unwrap().process(&e).unwrap();
        for m in ElectrodeMontage::all() {
            let direct = Preprocessor::standard(m.clone(), 128.0).unwrap().process(&e).unwrap();
            assert_eq!(full.restrict(&m).unwrap(), direct);
        }
    }
}
