use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use p300_core::classify::{train, ClassifierFamily, TrainingSet};
use p300_core::dataset::{ElectrodeMontage, Epoch, EpochSet, MontageName, Paradigm, SequenceRecord, Stage};
use p300_core::dsp::{preprocess_set, Preprocessor, FEATURE_RATE_HZ};
use p300_core::eval::{
    average_curves, cross_validated_accuracy, sequences_from_set, sweep_trials, trials_table,
    AccuracyCurve, ComparisonTable, CurvePoint, TableAxis,
};
use p300_core::io::{
    atomic_write, convert_external, emit_report, parse_alias_map, read_container, read_curve_csv,
    write_container, write_model, EpochContainer, ExternalKind, RunConfig,
};
use p300_core::synth::{calibrate_snr, generate_feature_sequences, generate_session, CalibrationOptions, SynthSpec};
use p300_core::{Error, Result};

#[derive(Parser)]
#[command(name = "p300", version, about = "P300 detection: preprocessing, classifiers, evaluation")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session, or calibrate its P300 amplitude.
    Generate(GenerateArgs),
    /// Convert an external export and/or preprocess raw epochs to features.
    Preprocess(PreprocessArgs),
    /// Train one classifier on every epoch of a feature container.
    Train(TrainArgs),
    /// Cross-validated accuracy per fold.
    Evaluate(RunArgs),
    /// Accuracy against trial count (and montage); writes curves and tables.
    Sweep(RunArgs),
    /// Rebuild tables and the reference summary from curve CSVs.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    sequences: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value = "III")]
    montage: String,
    #[arg(long, default_value_t = 128.0)]
    fs: f64,
    #[arg(long, default_value_t = 5.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 10.0)]
    noise: f64,
    #[arg(long, default_value_t = 300.0)]
    latency: f64,
    /// Write preprocessed features instead of raw epochs.
    #[arg(long)]
    features: bool,
    /// Calibrate the amplitude to this 5-trial accuracy and write a fixture
    /// file to --out instead of a session.
    #[arg(long)]
    calibrate: Option<f64>,
    #[arg(long, default_value = "bayes_lda")]
    family: String,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "III")]
    montage: String,
    /// Treat --input as a text export of this kind (epfl or bci2003).
    #[arg(long)]
    from: Option<String>,
    /// `alias=label` file applied to export column names.
    #[arg(long)]
    alias_map: Option<PathBuf>,
    /// Stop after conversion and write raw epochs.
    #[arg(long)]
    convert_only: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "bayes_lda")]
    family: String,
    #[arg(long, default_value = "II")]
    montage: String,
    #[arg(long)]
    hyper: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature containers, comma-separated.
    #[arg(long)]
    input: Option<String>,
    /// Montages (I, II, III), comma-separated.
    #[arg(long)]
    montage: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// Trial counts, comma-separated.
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hyper: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding curve_<family>_<montage>.csv files, optionally in
    /// per-dataset subdirectories.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Dataset tag for curves found directly in --input.
    #[arg(long, default_value = "synthetic")]
    dataset: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let montage: ElectrodeMontage = a.montage.parse()?;
    if let Some(target) = a.calibrate {
        let opts = CalibrationOptions {
            seed: a.seed,
            sample_rate_hz: a.fs,
            noise_std_uv: a.noise,
            ..CalibrationOptions::default()
        };
        let cal = calibrate_snr(target, a.family.parse()?, &montage, &opts)?;
        for (amp, acc) in &cal.history {
            info!("amplitude {amp:.4} uV: accuracy {acc:.4}");
        }
        atomic_write(&a.out, cal.to_fixture().as_bytes())?;
        println!(
            "calibrated amplitude {:.4} uV (accuracy {:.4})",
            cal.amplitude_uv, cal.achieved_accuracy
        );
        return Ok(());
    }
    let spec = SynthSpec {
        sample_rate_hz: a.fs,
        p300_amplitude_uv: a.amplitude,
        noise_std_uv: a.noise,
        latency_ms: a.latency,
        ..SynthSpec::new(a.sequences, a.trials, montage.clone(), a.seed)
    };
    let set = if a.features {
        let pre = Preprocessor::standard(montage, a.fs)?;
        features_to_set(&generate_feature_sequences(&spec, &pre)?)
    } else {
        generate_session(&spec)?.epochs
    };
    write_container(
        &EpochContainer {
            dataset: "synthetic".into(),
            set,
        },
        &a.out,
    )
}

fn features_to_set(seqs: &[SequenceRecord]) -> EpochSet {
    let labels = seqs
        .first()
        .and_then(|s| s.epochs.first())
        .map(|e| e.features.electrodes.clone())
        .unwrap_or_default();
    let epochs = seqs
        .iter()
        .flat_map(|s| {
            s.epochs.iter().map(move |e| Epoch {
                data: e.features.values.chunks(e.features.n_time).map(<[f64]>::to_vec).collect(),
                sample_rate_hz: FEATURE_RATE_HZ,
                stimulus_class: e.stimulus_class,
                is_target: e.features.label,
                channel_labels: e.features.electrodes.clone(),
                run_id: s.id,
                sequence_index: e.trial_index,
            })
        })
        .collect();
    EpochSet {
        sample_rate_hz: FEATURE_RATE_HZ,
        channel_labels: labels,
        paradigm: Paradigm::SixClass,
        stage: Stage::Features,
        reference_note: "synthetic, reference-free".into(),
        epochs,
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let container = match &a.from {
        Some(kind) => {
            let kind: ExternalKind = kind.parse()?;
            let aliases = match &a.alias_map {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    parse_alias_map(&text)?
                }
                None => Default::default(),
            };
            convert_external(&a.input, kind, &aliases)?
        }
        None => read_container(&a.input)?,
    };
    if a.convert_only {
        return write_container(&container, &a.out);
    }
    let montage: ElectrodeMontage = a.montage.parse()?;
    let pre = Preprocessor::standard(montage, container.set.sample_rate_hz)?;
    let set = preprocess_set(&container.set, &pre)?;
    info!("preprocessed {} epochs", set.epochs.len());
    write_container(
        &EpochContainer {
            dataset: container.dataset,
            set,
        },
        &a.out,
    )
}

fn load_features(path: &Path) -> Result<EpochContainer> {
    let c = read_container(path)?;
    if c.set.stage != Stage::Features {
        return Err(Error::InvalidRecording(format!(
            "{} holds raw epochs; run `p300 preprocess` first",
            path.display()
        )));
    }
    Ok(c)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let c = load_features(&a.input)?;
    let montage: ElectrodeMontage = a.montage.parse()?;
    let vectors = c
        .set
        .epochs
        .iter()
        .map(|e| p300_core::FeatureVector::from_epoch(e).restrict(&montage))
        .collect::<Result<Vec<_>>>()?;
    let data = TrainingSet::from_feature_vectors(&vectors)?;
    let model = train(a.family.parse()?, &data, a.hyper)?;
    write_model(&model, &a.out)?;
    println!(
        "trained {} on {} epochs (hyperparameter {})",
        model.family(),
        data.len(),
        model.hyperparameter()
    );
    Ok(())
}

fn run_config(a: RunArgs) -> Result<RunConfig> {
    let base = match &a.config {
        Some(p) => RunConfig::load_pairs(p)?,
        None => BTreeMap::new(),
    };
    let mut over = BTreeMap::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            over.insert(k.to_string(), v);
        }
    };
    set("input", a.input);
    set("montage", a.montage);
    set("family", a.family);
    set("trials", a.trials);
    set("folds", a.folds.map(|v| v.to_string()));
    set("seed", a.seed.map(|v| v.to_string()));
    set("hyper", a.hyper.map(|v| v.to_string()));
    set("out", a.out.map(|p| p.display().to_string()));
    RunConfig::resolve(&base, &over)
}

/// Dataset tag and independent six-class tasks of every input.
fn load_tasks(cfg: &RunConfig) -> Result<Vec<(String, Vec<Vec<SequenceRecord>>)>> {
    cfg.inputs
        .iter()
        .map(|p| {
            let c = load_features(p)?;
            Ok((c.dataset.clone(), sequences_from_set(&c.set)?))
        })
        .collect()
}

fn task_name(n_tasks: usize, i: usize) -> &'static str {
    match (n_tasks, i) {
        (1, _) => "all",
        (_, 0) => "rows",
        _ => "columns",
    }
}

fn evaluate(a: RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let mut csv = String::from("dataset,task,montage,n_trials,fold,correct,total,accuracy\n");
    for (tag, tasks) in load_tasks(&cfg)? {
        for (ti, seqs) in tasks.iter().enumerate() {
            for m in &cfg.montages {
                for &n in &cfg.trials {
                    let r = cross_validated_accuracy(seqs, cfg.family, m, n, cfg.folds, cfg.seed, cfg.hyper)?;
                    let task = task_name(tasks.len(), ti);
                    for f in &r.per_fold {
                        let _ = writeln!(
                            csv,
                            "{tag},{task},{m},{n},{},{},{},{:.4}",
                            f.fold,
                            f.correct,
                            f.total,
                            f.accuracy()
                        );
                    }
                    let correct: usize = r.per_fold.iter().map(|f| f.correct).sum();
                    let _ = writeln!(
                        csv,
                        "{tag},{task},{m},{n},all,{correct},{},{:.4}",
                        r.n_sequences, r.accuracy
                    );
                    println!("{tag} {task} {m} n_trials={n}: accuracy {:.4}", r.accuracy);
                }
            }
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Io {
        path: cfg.out.clone(),
        source: e,
    })?;
    atomic_write(
        &cfg.out.join(format!("evaluate_{}.csv", cfg.family.as_str())),
        csv.as_bytes(),
    )
}

/// Rows of the montage table: the 5-trial column when swept, else the
/// largest trial count.
fn table_trials(trials: &[usize]) -> usize {
    if trials.contains(&5) {
        5
    } else {
        trials.iter().copied().max().unwrap_or(5)
    }
}

fn build_tables(curves: &[AccuracyCurve]) -> Result<Vec<ComparisonTable>> {
    let mut tags: Vec<String> = curves.iter().map(|c| c.dataset_tag.clone()).collect();
    tags.dedup();
    let mut by_trials = Vec::new();
    let mut by_montage = Vec::new();
    for tag in &tags {
        let mine: Vec<&AccuracyCurve> = curves.iter().filter(|c| &c.dataset_tag == tag).collect();
        let main = mine
            .iter()
            .find(|c| c.montage == MontageName::ConfigII)
            .unwrap_or(&mine[0]);
        by_trials.push(trials_table(main));
        if mine.len() > 1 {
            let trials: Vec<usize> = main.points.iter().map(|p| p.n_trials).collect();
            let n = table_trials(&trials);
            by_montage.push(ComparisonTable {
                axis: TableAxis::Montage,
                rows: mine.iter().map(|c| ElectrodeMontage::new(c.montage).len().to_string()).collect(),
                columns: vec![tag.clone()],
                cells: mine
                    .iter()
                    .map(|c| vec![100.0 * c.accuracy_at(n).unwrap_or(f64::NAN)])
                    .collect(),
            });
        }
    }
    let mut tables = Vec::new();
    if !by_trials.is_empty() {
        tables.push(ComparisonTable::merge(&by_trials)?);
    }
    if !by_montage.is_empty() {
        tables.push(ComparisonTable::merge(&by_montage)?);
    }
    Ok(tables)
}

fn sweep(a: RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let mut curves = Vec::new();
    for (tag, tasks) in load_tasks(&cfg)? {
        for m in &cfg.montages {
            let per_task = tasks
                .iter()
                .map(|seqs| sweep_trials(seqs, cfg.family, m, &cfg.trials, cfg.folds, cfg.seed, cfg.hyper, &tag))
                .collect::<Result<Vec<_>>>()?;
            let curve = average_curves(&per_task)?;
            for p in &curve.points {
                println!("{tag} {m} n_trials={}: accuracy {:.4}", p.n_trials, p.accuracy);
            }
            curves.push(curve);
        }
    }
    let tables = build_tables(&curves)?;
    for path in emit_report(&curves, &tables, &cfg.out)? {
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_curve_name(name: &str) -> Option<(ClassifierFamily, MontageName)> {
    let stem = name.strip_prefix("curve_")?.strip_suffix(".csv")?;
    let (family, montage) = stem.rsplit_once("_CONFIG_")?;
    let m: ElectrodeMontage = montage.parse().ok()?;
    Some((family.parse().ok()?, m.name))
}

fn read_curves(dir: &Path, tag: &str, out: &mut Vec<AccuracyCurve>) -> Result<Vec<PathBuf>> {
    let io_err = |e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(io_err)?;
    entries.sort();
    let mut subdirs = Vec::new();
    for path in entries {
        if path.is_dir() {
            subdirs.push(path);
            continue;
        }
        let Some((family, montage)) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(parse_curve_name)
        else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let points: Vec<CurvePoint> = read_curve_csv(&text)?;
        out.push(AccuracyCurve {
            family,
            montage,
            dataset_tag: tag.to_string(),
            points,
        });
    }
    Ok(subdirs)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut curves = Vec::new();
    for sub in read_curves(&a.input, &a.dataset, &mut curves)? {
        if let Some(tag) = sub.file_name().and_then(|n| n.to_str()) {
            read_curves(&sub, tag, &mut curves)?;
        }
    }
    curves.sort_by(|x, y| (&x.dataset_tag, x.montage).cmp(&(&y.dataset_tag, y.montage)));
    let tables = build_tables(&curves)?;
    emit_report(&[], &tables, &a.out)?;
    Ok(())
}
