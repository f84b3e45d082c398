//! Converters from plain-text exports of external recordings.
//!
//! An export is a text file with optional `key=value` metadata lines
//! (`rate` is required, `reference` optional), then a column header, then
//! one row per sample. Columns are channel labels plus `stimulus_code`,
//! `stimulus_type` and `run`; separators may be commas or whitespace.
//! `stimulus_code` is 0 between stimuli and holds the code while a stimulus
//! is shown; an onset is a sample where the code changes to a non-zero
//! value. `stimulus_type` is non-zero on target presentations.
//!
//! EPFL codes 1-6 are the six images. BCI2003 speller codes 1-6 are
//! columns and 7-12 rows; they map to classes 6-11 and 0-5 respectively.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;

use super::container::EpochContainer;
use super::{parse_key_values, read_file};
use crate::dataset::{
    extract_epochs, rereference_to_mastoids, EpochSet, Paradigm, Recording, StimulusEvent,
    EPOCH_WINDOW_MS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalKind {
    Epfl,
    Bci2003,
}

impl ExternalKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExternalKind::Epfl => "epfl",
            ExternalKind::Bci2003 => "bci2003",
        }
    }

    fn paradigm(self) -> Paradigm {
        match self {
            ExternalKind::Epfl => Paradigm::SixClass,
            ExternalKind::Bci2003 => Paradigm::RowColumn,
        }
    }

    fn class_of(self, code: i64) -> Option<u8> {
        match (self, code) {
            (ExternalKind::Epfl, 1..=6) => Some(code as u8 - 1),
            (ExternalKind::Bci2003, 1..=6) => Some(code as u8 + 5),
            (ExternalKind::Bci2003, 7..=12) => Some(code as u8 - 7),
            _ => None,
        }
    }
}

impl std::str::FromStr for ExternalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epfl" => Ok(ExternalKind::Epfl),
            "bci2003" => Ok(ExternalKind::Bci2003),
            other => Err(Error::Config(format!("unknown export kind {other:?}"))),
        }
    }
}

/// `alias=canonical` lines mapping export labels to 10-20 names.
pub fn parse_alias_map(text: &str) -> Result<HashMap<String, String>> {
    Ok(parse_key_values(text)?.into_iter().collect())
}

fn schema(field: &str, message: impl Into<String>) -> Error {
    Error::SchemaMismatch {
        field: field.to_string(),
        message: message.into(),
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses an export and cuts it into raw 1000 ms epochs, re-referenced to
/// the mastoid average when a mastoid pair is present.
pub fn convert_text(
    text: &str,
    kind: ExternalKind,
    aliases: &HashMap<String, String>,
) -> Result<EpochContainer> {
    let mut meta = BTreeMap::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let header = loop {
        let (_, line) = lines
            .next()
            .ok_or_else(|| schema("columns", "no column header line"))?;
        match line.split_once('=') {
            Some((k, v)) => {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => break split_fields(line),
        }
    };
    let rate: f64 = meta
        .get("rate")
        .ok_or_else(|| schema("rate", "missing sampling rate"))?
        .parse()
        .map_err(|_| schema("rate", "not a number"))?;

    let column = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| schema(name, "column missing"))
    };
    let code_col = column("stimulus_code")?;
    let type_col = column("stimulus_type")?;
    let run_col = column("run")?;
    let channel_cols: Vec<usize> = (0..header.len())
        .filter(|i| ![code_col, type_col, run_col].contains(i))
        .collect();
    let labels: Vec<String> = channel_cols
        .iter()
        .map(|&i| {
            let h = header[i];
            aliases.get(h).cloned().unwrap_or_else(|| h.to_string())
        })
        .collect();

    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    let mut events = Vec::new();
    let mut trial_counts: HashMap<(u64, u8), u32> = HashMap::new();
    let mut prev: Option<(i64, u64)> = None;
    for (line_no, line) in lines {
        let fields = split_fields(line);
        if fields.len() != header.len() {
            return Err(schema(
                "columns",
                format!("line {line_no}: {} fields, header has {}", fields.len(), header.len()),
            ));
        }
        let num = |col: usize| -> Result<f64> {
            fields[col]
                .parse()
                .map_err(|_| schema(header[col], format!("line {line_no}: bad value {:?}", fields[col])))
        };
        let code = num(code_col)?;
        let run = num(run_col)?;
        if code.fract() != 0.0 || run.fract() != 0.0 || run < 0.0 {
            return Err(schema("stimulus_code", format!("line {line_no}: codes and runs must be integers")));
        }
        let (code, run) = (code as i64, run as u64);
        let onset_index = samples.first().map_or(0, Vec::len);
        for (row, &c) in samples.iter_mut().zip(&channel_cols) {
            row.push(num(c)?);
        }
        let is_onset = code != 0 && prev != Some((code, run));
        prev = Some((code, run));
        if is_onset {
            let class = kind
                .class_of(code)
                .ok_or_else(|| schema("stimulus_code", format!("line {line_no}: code {code} out of range")))?;
            let counter = trial_counts.entry((run, class)).or_insert(0);
            events.push(StimulusEvent {
                onset_sample: onset_index,
                stimulus_class: class,
                is_target: num(type_col)? != 0.0,
                run_id: run,
                sequence_index: *counter,
            });
            *counter += 1;
        }
    }
    if labels.is_empty() {
        return Err(schema("columns", "no channel columns"));
    }

    let reference = meta.get("reference").cloned().unwrap_or_default();
    let rec = Recording::new(samples, rate, labels, reference, events, kind.paradigm())?;
    let rec = rereference_to_mastoids(&rec)?;
    let extraction = extract_epochs(&rec, EPOCH_WINDOW_MS)?;
    if !extraction.truncated.is_empty() {
        warn!("{} event(s) dropped at the end of the export", extraction.truncated.len());
    }
    Ok(EpochContainer {
        dataset: kind.tag().to_string(),
        set: EpochSet::from_recording(&rec, extraction.epochs),
    })
}

/// Reads an export file; see [`convert_text`].
pub fn convert_external(
    path: &Path,
    kind: ExternalKind,
    aliases: &HashMap<String, String>,
) -> Result<EpochContainer> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| schema("encoding", "export is not UTF-8"))?;
    convert_text(&text, kind, aliases)
}
