use p300_core::classify::{train, ClassifierFamily, TrainingSet};
use p300_core::dataset::{ElectrodeMontage, EpochSet, Stage};
use p300_core::dsp::{preprocess_set, Preprocessor};
use p300_core::io::{decode_container, decode_model, encode_container, encode_model, read_container, write_container};
use p300_core::synth::{generate_session, SynthSpec};
use p300_core::EpochContainer;

fn session(seed: u64) -> EpochSet {
    generate_session(&SynthSpec::new(3, 2, ElectrodeMontage::config_ii(), seed)).unwrap().epochs
}

#[test]
fn raw_and_feature_containers_round_trip() {
    let raw = EpochContainer {
        dataset: "synthetic".into(),
        set: session(1),
    };
    assert_eq!(decode_container(&encode_container(&raw).unwrap()).unwrap(), raw);

    let pre = Preprocessor::standard(ElectrodeMontage::config_ii(), raw.set.sample_rate_hz).unwrap();
    let features = EpochContainer {
        dataset: "synthetic".into(),
        set: preprocess_set(&raw.set, &pre).unwrap(),
    };
    assert_eq!(features.set.stage, Stage::Features);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.p300");
    write_container(&features, &path).unwrap();
    assert_eq!(read_container(&path).unwrap(), features);
}

#[test]
fn corrupt_containers_are_rejected() {
    let bytes = encode_container(&EpochContainer {
        dataset: "synthetic".into(),
        set: session(2),
    })
    .unwrap();
    assert!(decode_container(&bytes[..bytes.len() / 2]).is_err());
    assert!(decode_container(b"not a container").is_err());
}

#[test]
fn models_round_trip_bit_for_bit() {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), (i % 3) as f64 / 3.0])
        .collect();
    let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0 || i % 7 == 0).collect();
    let data = TrainingSet::new(rows.iter().map(Vec::as_slice).collect(), labels).unwrap();
    for family in ClassifierFamily::ALL {
        let model = train(family, &data, Some(0.05)).unwrap();
        let bytes = encode_model(&model);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, model);
        for r in &rows {
            assert_eq!(back.score(r).unwrap().to_bits(), model.score(r).unwrap().to_bits());
        }
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
    }
}
