//! Sequence-level cross-validated evaluation.
//!
//! A sequence is one six-class decision. Folds are drawn over sequences,
//! classifiers are trained on every epoch of the training sequences, and a
//! held-out sequence is assigned the class whose first `n` trials have the
//! highest mean score.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{train, ClassifierFamily, Scorer, TrainedClassifier, TrainingSet};
use crate::dataset::{
    ElectrodeMontage, EpochSet, MontageName, Paradigm, SequenceEntry, SequenceRecord, Stage,
    N_CLASSES,
};
use crate::dsp::FeatureVector;
use crate::error::{Error, Result};

/// Assignment of sequences to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<u64, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, id: u64) -> Option<usize> {
        self.assignment.get(&id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Sequence ids held out in `fold`.
    pub fn test_ids(&self, fold: usize) -> Vec<u64> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(&id, _)| id)
            .collect()
    }
}

/// Shuffles sequence ids under `seed` and deals them round-robin into `k`
/// folds, so fold sizes differ by at most one.
pub fn plan_folds(sequences: &[SequenceRecord], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidFoldCount(k));
    }
    if sequences.len() < k {
        return Err(Error::TooFewSequences {
            k,
            got: sequences.len(),
        });
    }
    let mut ids: Vec<u64> = sequences.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidRecording("duplicate sequence id".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids.into_iter().enumerate().map(|(i, id)| (id, i % k)).collect();
    Ok(FoldPlan { k, assignment })
}

/// Predicted class of one sequence from its first `n_trials` trials per
/// class (by `trial_index`). Ties go to the lowest class index.
pub fn score_sequence<S: Scorer + ?Sized>(
    clf: &S,
    seq: &SequenceRecord,
    n_trials: usize,
) -> Result<u8> {
    if n_trials == 0 {
        return Err(Error::EmptyRequest("n_trials must be at least 1".into()));
    }
    let mut by_class: [Vec<&SequenceEntry>; N_CLASSES] = Default::default();
    for e in &seq.epochs {
        by_class[e.stimulus_class as usize].push(e);
    }
    let mut best = 0u8;
    let mut best_mean = f64::NEG_INFINITY;
    for (class, entries) in by_class.iter_mut().enumerate() {
        if entries.len() < n_trials {
            return Err(Error::IncompleteSequence {
                sequence: seq.id,
                class: class as u8,
                available: entries.len(),
                requested: n_trials,
            });
        }
        entries.sort_by_key(|e| e.trial_index);
        let mut sum = 0.0;
        for e in &entries[..n_trials] {
            sum += clf.score(&e.features)?;
        }
        let mean = sum / n_trials as f64;
        if class == 0 || mean > best_mean {
            best = class as u8;
            best_mean = mean;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub correct: usize,
    pub total: usize,
}

impl FoldResult {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Pooled accuracy over all held-out sequences, with per-fold counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub accuracy: f64,
    pub n_sequences: usize,
    pub per_fold: Vec<FoldResult>,
}

impl CvResult {
    fn from_folds(per_fold: Vec<FoldResult>) -> Self {
        let correct: usize = per_fold.iter().map(|f| f.correct).sum();
        let total: usize = per_fold.iter().map(|f| f.total).sum();
        CvResult {
            accuracy: correct as f64 / total as f64,
            n_sequences: total,
            per_fold,
        }
    }
}

/// Sequences with every feature vector restricted to `montage`.
pub fn restrict_sequences(
    sequences: &[SequenceRecord],
    montage: &ElectrodeMontage,
) -> Result<Vec<SequenceRecord>> {
    sequences
        .par_iter()
        .map(|s| {
            let epochs = s
                .epochs
                .iter()
                .map(|e| {
                    Ok(SequenceEntry {
                        features: e.features.restrict(montage)?,
                        ..e.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SequenceRecord {
                epochs,
                ..s.clone()
            })
        })
        .collect()
}

/// Trains one scorer per fold and scores the held-out sequences at every
/// requested trial count. Returns `results[trial][fold]`.
fn run_folds<S, F>(
    sequences: &[SequenceRecord],
    trial_list: &[usize],
    plan: &FoldPlan,
    trainer: &F,
) -> Result<Vec<Vec<FoldResult>>>
where
    S: Scorer + Send,
    F: Fn(&TrainingSet<'_>) -> Result<S> + Sync,
{
    let per_fold: Vec<Vec<FoldResult>> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let mut features: Vec<&[f64]> = Vec::new();
            let mut labels = Vec::new();
            let mut test = Vec::new();
            for s in sequences {
                if plan.fold_of(s.id) == Some(fold) {
                    test.push(s);
                } else {
                    for e in &s.epochs {
                        features.push(&e.features.values);
                        labels.push(e.features.label);
                    }
                }
            }
            let data = TrainingSet::new(features, labels)?;
            let model = trainer(&data)?;
            trial_list
                .iter()
                .map(|&n| {
                    let mut correct = 0;
                    for s in &test {
                        if score_sequence(&model, s, n)? == s.target_class {
                            correct += 1;
                        }
                    }
                    Ok(FoldResult {
                        fold,
                        correct,
                        total: test.len(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..trial_list.len())
        .map(|t| per_fold.iter().map(|f| f[t].clone()).collect())
        .collect())
}

fn check_trials(sequences: &[SequenceRecord], trial_list: &[usize]) -> Result<()> {
    if trial_list.is_empty() {
        return Err(Error::EmptyRequest("no trial counts requested".into()));
    }
    if let Some(&n) = trial_list.iter().max() {
        for s in sequences {
            if s.n_trials < n {
                let class = (0..N_CLASSES as u8)
                    .find(|&c| s.epochs.iter().filter(|e| e.stimulus_class == c).count() < n)
                    .unwrap_or(0);
                return Err(Error::IncompleteSequence {
                    sequence: s.id,
                    class,
                    available: s.n_trials,
                    requested: n,
                });
            }
        }
    }
    Ok(())
}

/// Cross-validated accuracy with a caller-supplied trainer.
pub fn cross_validated_accuracy_with<S, F>(
    sequences: &[SequenceRecord],
    montage: &ElectrodeMontage,
    n_trials: usize,
    k: usize,
    seed: u64,
    trainer: F,
) -> Result<CvResult>
where
    S: Scorer + Send,
    F: Fn(&TrainingSet<'_>) -> Result<S> + Sync,
{
    let seqs = restrict_sequences(sequences, montage)?;
    check_trials(&seqs, &[n_trials])?;
    let plan = plan_folds(&seqs, k, seed)?;
    let mut results = run_folds(&seqs, &[n_trials], &plan, &trainer)?;
    Ok(CvResult::from_folds(results.remove(0)))
}

fn family_trainer(
    family: ClassifierFamily,
    hyper: Option<f64>,
) -> impl Fn(&TrainingSet<'_>) -> Result<TrainedClassifier> + Sync {
    move |data| train(family, data, hyper)
}

/// `k`-fold accuracy of `family` on `montage` using `n_trials` per class.
/// `hyper` overrides the family's default or cross-validated
/// hyperparameter.
pub fn cross_validated_accuracy(
    sequences: &[SequenceRecord],
    family: ClassifierFamily,
    montage: &ElectrodeMontage,
    n_trials: usize,
    k: usize,
    seed: u64,
    hyper: Option<f64>,
) -> Result<CvResult> {
    cross_validated_accuracy_with(sequences, montage, n_trials, k, seed, family_trainer(family, hyper))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_trials: usize,
    pub accuracy: f64,
    pub n_sequences: usize,
}

/// Accuracy against the number of averaged trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    pub family: ClassifierFamily,
    pub montage: MontageName,
    pub dataset_tag: String,
    pub points: Vec<CurvePoint>,
}

impl AccuracyCurve {
    pub fn accuracy_at(&self, n_trials: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n_trials == n_trials).map(|p| p.accuracy)
    }
}

/// One cross-validated accuracy per trial count. Each fold's model is
/// trained once and reused for every count, which gives the same numbers
/// as separate [`cross_validated_accuracy`] calls.
#[allow(clippy::too_many_arguments)]
pub fn sweep_trials(
    sequences: &[SequenceRecord],
    family: ClassifierFamily,
    montage: &ElectrodeMontage,
    trial_list: &[usize],
    k: usize,
    seed: u64,
    hyper: Option<f64>,
    dataset_tag: &str,
) -> Result<AccuracyCurve> {
    let mut trials = trial_list.to_vec();
    trials.sort_unstable();
    trials.dedup();
    if trials.first() == Some(&0) {
        return Err(Error::EmptyRequest("n_trials must be at least 1".into()));
    }
    let seqs = restrict_sequences(sequences, montage)?;
    check_trials(&seqs, &trials)?;
    let plan = plan_folds(&seqs, k, seed)?;
    let results = run_folds(&seqs, &trials, &plan, &family_trainer(family, hyper))?;
    let points = trials
        .iter()
        .zip(results)
        .map(|(&n_trials, folds)| {
            let r = CvResult::from_folds(folds);
            CurvePoint {
                n_trials,
                accuracy: r.accuracy,
                n_sequences: r.n_sequences,
            }
        })
        .collect();
    Ok(AccuracyCurve {
        family,
        montage: montage.name,
        dataset_tag: dataset_tag.to_string(),
        points,
    })
}

/// Which quantity varies down the rows of a [`ComparisonTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableAxis {
    Montage,
    Trials,
}

impl TableAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            TableAxis::Montage => "montage",
            TableAxis::Trials => "trials",
        }
    }
}

/// Accuracy percentages, one row per axis value and one column per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub axis: TableAxis,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][column]`, in percent.
    pub cells: Vec<Vec<f64>>,
}

impl ComparisonTable {
    /// Joins single-column tables with identical rows side by side.
    pub fn merge(tables: &[ComparisonTable]) -> Result<ComparisonTable> {
        let first = tables
            .first()
            .ok_or_else(|| Error::EmptyRequest("no tables to merge".into()))?;
        let mut out = ComparisonTable {
            axis: first.axis,
            rows: first.rows.clone(),
            columns: Vec::new(),
            cells: vec![Vec::new(); first.rows.len()],
        };
        for t in tables {
            if t.axis != out.axis || t.rows != out.rows {
                return Err(Error::CountMismatch("tables have different rows".into()));
            }
            out.columns.extend(t.columns.iter().cloned());
            for (dst, src) in out.cells.iter_mut().zip(&t.cells) {
                dst.extend(src);
            }
        }
        Ok(out)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.cells[r][c])
    }
}

/// One cross-validated accuracy per montage at a fixed trial count.
#[allow(clippy::too_many_arguments)]
pub fn sweep_montages(
    sequences: &[SequenceRecord],
    family: ClassifierFamily,
    montages: &[ElectrodeMontage],
    n_trials: usize,
    k: usize,
    seed: u64,
    hyper: Option<f64>,
    dataset_tag: &str,
) -> Result<ComparisonTable> {
    if montages.is_empty() {
        return Err(Error::EmptyRequest("no montages requested".into()));
    }
    let mut cells = Vec::with_capacity(montages.len());
    for m in montages {
        let r = cross_validated_accuracy(sequences, family, m, n_trials, k, seed, hyper)?;
        cells.push(vec![100.0 * r.accuracy]);
    }
    Ok(ComparisonTable {
        axis: TableAxis::Montage,
        rows: montages.iter().map(|m| m.len().to_string()).collect(),
        columns: vec![dataset_tag.to_string()],
        cells,
    })
}

/// Table with trial counts as rows, read off a curve.
pub fn trials_table(curve: &AccuracyCurve) -> ComparisonTable {
    ComparisonTable {
        axis: TableAxis::Trials,
        rows: curve.points.iter().map(|p| p.n_trials.to_string()).collect(),
        columns: vec![curve.dataset_tag.clone()],
        cells: curve.points.iter().map(|p| vec![100.0 * p.accuracy]).collect(),
    }
}

/// Averages curves of independent tasks on the same trial grid (the row
/// and column problems of a speller), pooling the sequence counts.
pub fn average_curves(curves: &[AccuracyCurve]) -> Result<AccuracyCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::EmptyRequest("no curves to average".into()))?;
    let mut out = first.clone();
    for c in &curves[1..] {
        if c.points.len() != out.points.len()
            || c.points.iter().zip(&out.points).any(|(a, b)| a.n_trials != b.n_trials)
        {
            return Err(Error::CountMismatch("curves use different trial counts".into()));
        }
        for (dst, src) in out.points.iter_mut().zip(&c.points) {
            dst.accuracy += src.accuracy;
            dst.n_sequences += src.n_sequences;
        }
    }
    let n = curves.len() as f64;
    for p in &mut out.points {
        p.accuracy /= n;
    }
    Ok(out)
}

fn entry(e: &crate::dataset::Epoch) -> SequenceEntry {
    SequenceEntry {
        stimulus_class: e.stimulus_class,
        trial_index: e.sequence_index,
        features: FeatureVector::from_epoch(e),
    }
}

fn require_features(set: &EpochSet) -> Result<()> {
    if set.stage != Stage::Features {
        return Err(Error::InvalidRecording(
            "sequences need a preprocessed (features) epoch set".into(),
        ));
    }
    Ok(())
}

/// Groups a six-class feature set into one sequence per run.
pub fn sixclass_to_sequences(set: &EpochSet) -> Result<Vec<SequenceRecord>> {
    require_features(set)?;
    let mut runs: BTreeMap<u64, Vec<&crate::dataset::Epoch>> = BTreeMap::new();
    for e in &set.epochs {
        runs.entry(e.run_id).or_default().push(e);
    }
    runs.into_iter()
        .map(|(run, epochs)| {
            let mut targets: Vec<u8> = epochs
                .iter()
                .filter(|e| e.is_target)
                .map(|e| e.stimulus_class)
                .collect();
            targets.dedup();
            let [target] = targets[..] else {
                return Err(Error::InvalidRecording(format!(
                    "run {run} needs exactly one target class, found {targets:?}"
                )));
            };
            SequenceRecord::new(run, epochs.into_iter().map(entry).collect(), target)
        })
        .collect()
}

/// Splits each speller block (one run per character, codes 0-5 for rows
/// and 6-11 for columns) into a row sequence and a column sequence, both
/// with classes 0-5. Row sequences get id `2 * run`, columns `2 * run + 1`.
pub fn rowcol_to_sequences(set: &EpochSet) -> Result<(Vec<SequenceRecord>, Vec<SequenceRecord>)> {
    require_features(set)?;
    let mut runs: BTreeMap<u64, Vec<&crate::dataset::Epoch>> = BTreeMap::new();
    for e in &set.epochs {
        runs.entry(e.run_id).or_default().push(e);
    }
    let mut rows = Vec::with_capacity(runs.len());
    let mut cols = Vec::with_capacity(runs.len());
    for (run, epochs) in runs {
        let mut present = [false; 2 * N_CLASSES];
        let mut row_target = None;
        let mut col_target = None;
        for e in &epochs {
            let code = e.stimulus_class as usize;
            if code >= 2 * N_CLASSES {
                return Err(Error::MalformedSpellerBlock {
                    block: run,
                    reason: format!("stimulus code {code} outside 0-11"),
                });
            }
            present[code] = true;
            if e.is_target {
                let slot = if code < N_CLASSES { &mut row_target } else { &mut col_target };
                let c = (code % N_CLASSES) as u8;
                if slot.is_some_and(|t| t != c) {
                    return Err(Error::MalformedSpellerBlock {
                        block: run,
                        reason: "more than one target row or column".into(),
                    });
                }
                *slot = Some(c);
            }
        }
        let n_present = present.iter().filter(|&&p| p).count();
        if n_present != 2 * N_CLASSES {
            return Err(Error::MalformedSpellerBlock {
                block: run,
                reason: format!("{n_present} stimulus codes present, need 12"),
            });
        }
        let (Some(rt), Some(ct)) = (row_target, col_target) else {
            return Err(Error::MalformedSpellerBlock {
                block: run,
                reason: "target row or column missing".into(),
            });
        };
        let mut row_entries = Vec::new();
        let mut col_entries = Vec::new();
        for e in epochs {
            let mut en = entry(e);
            en.stimulus_class %= N_CLASSES as u8;
            en.features.stimulus_class = en.stimulus_class;
            if (e.stimulus_class as usize) < N_CLASSES {
                row_entries.push(en);
            } else {
                col_entries.push(en);
            }
        }
        rows.push(SequenceRecord::new(2 * run, row_entries, rt)?);
        cols.push(SequenceRecord::new(2 * run + 1, col_entries, ct)?);
    }
    Ok((rows, cols))
}

/// The independent six-class tasks in a feature set: one for six-class
/// paradigms, rows then columns for row/column spellers.
pub fn sequences_from_set(set: &EpochSet) -> Result<Vec<Vec<SequenceRecord>>> {
    match set.paradigm {
        Paradigm::SixClass => Ok(vec![sixclass_to_sequences(set)?]),
        Paradigm::RowColumn => {
            let (rows, cols) = rowcol_to_sequences(set)?;
            Ok(vec![rows, cols])
        }
    }
}
