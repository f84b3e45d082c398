mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use p300_core::dataset::{SequenceEntry, SequenceRecord};
use p300_core::dsp::FeatureVector;
use p300_core::eval::score_sequence;
use p300_core::synth::brute_force_sequence_decision;

/// A sequence whose single feature is the score itself.
fn sequence(table: &[Vec<f64>]) -> SequenceRecord {
    let mut epochs = Vec::new();
    for (class, row) in table.iter().enumerate() {
        for (t, &s) in row.iter().enumerate() {
            let mut f = FeatureVector::zeros(1, vec!["Cz".into()], false, class as u8);
            f.values[0] = s;
            epochs.push(SequenceEntry {
                stimulus_class: class as u8,
                trial_index: t as u32,
                features: f,
            });
        }
    }
    SequenceRecord::new(0, epochs, 0).unwrap()
}

fn value(x: &FeatureVector) -> f64 {
    x.values[0]
}

fn random_table(r: &mut impl Rng, trials: usize) -> Vec<Vec<f64>> {
    // Small integer scores make ties common.
    let coarse = r.random_bool(0.5);
    (0..6)
        .map(|_| {
            (0..trials)
                .map(|_| if coarse { r.random_range(-2..=2) as f64 } else { r.random_range(-3.0..3.0) })
                .collect()
        })
        .collect()
}

#[test]
fn matches_brute_force_on_100k_tables() {
    let mut r = common::rng(21);
    let mut ties = 0;
    for _ in 0..100_000 {
        let trials = r.random_range(1..=10);
        let n = r.random_range(1..=trials);
        let table = random_table(&mut r, trials);
        let want = brute_force_sequence_decision(&table, n).unwrap();
        let got = score_sequence(&value, &sequence(&table), n).unwrap();
        assert_eq!(got, want, "{table:?} n={n}");
        let means: Vec<f64> = table.iter().map(|row| row[..n].iter().sum::<f64>()).collect();
        let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if means.iter().filter(|&&m| m == top).count() > 1 {
            ties += 1;
        }
    }
    assert!(ties > 1000, "only {ties} tied tables");
}

#[test]
fn ties_go_to_the_lowest_class() {
    let table = vec![vec![0.0], vec![1.0], vec![0.5], vec![1.0], vec![1.0], vec![-1.0]];
    assert_eq!(score_sequence(&value, &sequence(&table), 1).unwrap(), 1);
    let flat = vec![vec![0.0; 3]; 6];
    assert_eq!(score_sequence(&value, &sequence(&flat), 3).unwrap(), 0);
}

proptest! {
    #[test]
    fn epoch_order_does_not_matter(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let table = random_table(&mut r, 8);
        let mut seq = sequence(&table);
        let want = score_sequence(&value, &seq, 5).unwrap();
        seq.epochs.shuffle(&mut r);
        prop_assert_eq!(score_sequence(&value, &seq, 5).unwrap(), want);
    }

    #[test]
    fn positive_affine_maps_keep_the_decision(seed in any::<u64>(), k in -4i32..4, b in -64i32..64) {
        let mut r = common::rng(seed);
        let table = random_table(&mut r, 6);
        let seq = sequence(&table);
        // Power-of-two scales and integer shifts are exact on these scores.
        let a = 2f64.powi(k);
        let mapped = |x: &FeatureVector| a * x.values[0] + b as f64;
        for n in 1..=6 {
            prop_assert_eq!(
                score_sequence(&mapped, &seq, n).unwrap(),
                score_sequence(&value, &seq, n).unwrap()
            );
        }
    }
}
